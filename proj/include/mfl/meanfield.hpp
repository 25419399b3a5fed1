#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mfl/ocp.hpp"
#include "mfl/transport.hpp"

namespace mfl {

struct InitialMeasureSpec {
    enum class Kind { uniform_box, gaussian_truncated, points };

    Kind kind = Kind::uniform_box;
    int dim = 1;
    std::uint64_t seed = 0;
    std::vector<double> lo, hi;          // uniform_box
    std::vector<double> mean, sigma;     // gaussian_truncated (per coordinate)
    double radius = 0.0;                 // truncation half-width, absolute
    std::vector<double> points;          // explicit list, flattened
};

/// Quantizes the measure to N points: midpoint quantiles in 1d, a balanced
/// tensor grid of marginal quantiles for product measures when N factors,
/// seeded i.i.d. sampling otherwise. Explicit lists require N equal to the
/// list length.
std::vector<double> quantize(const InitialMeasureSpec& spec, int N);

/// Integral of f against the given measure, estimated on a dense quantization
/// (reference for moment-convergence checks).
double reference_moment(const InitialMeasureSpec& spec, int n_ref,
                        const std::function<double(std::span<const double>)>& f);

struct TestFunction {
    std::string name;
    std::function<double(std::span<const double>)> eval;
    std::function<void(std::span<const double>, std::span<double>)> grad;
};

/// Damped coordinates, damped quadratic monomials, and two seeded radial
/// bumps; all C^1 with bounded gradients.
std::vector<TestFunction> default_dictionary(int dim, double radius, std::uint64_t seed);

/// Worst weak-form defect of the continuity equation along the trajectory:
/// per interval, the change of (1/N) sum zeta(x_i) is compared with the
/// Hermite-Simpson quadrature of (1/N) sum <F(x_i,mu)+v_i, grad zeta(x_i)>.
double continuity_residual(const Trajectory& traj, const ControlSignal& u,
                           const InteractionModel& model,
                           const std::vector<TestFunction>& dictionary);

/// Time-sliced control measure nu_t = (1/N) sum u_i(t) delta_{x_i(t)} with
/// base atom mass dt/(T N); controls stored embedded in R^d.
struct ControlMeasure {
    int dim = 0;
    std::vector<double> times;      // one per atom
    std::vector<double> positions;  // atoms*dim
    std::vector<double> controls;   // atoms*dim
    std::vector<double> masses;     // base masses, sum to 1

    int atoms() const { return static_cast<int>(times.size()); }
    /// Total |nu|-mass: sum of base mass times |u|.
    double total_variation() const;
};

ControlMeasure build_control_measure(const Trajectory& traj, const ControlSignal& u,
                                     const Subspace& control_subspace);

/// (1/T) sum_k dt (1/N) sum_i xi(t_k, x_i(t_k)) . u_i(t_k).
double weakstar_pairing(const ControlMeasure& nu,
                        const std::function<void(double, std::span<const double>, std::span<double>)>& xi);

struct TrajectoryBundle {
    TimeGrid grid;
    int dim = 0;
    std::vector<std::vector<double>> curves;  // each (steps+1)*dim, weight 1/N

    static TrajectoryBundle from_trajectory(const Trajectory& traj);
};

struct SuperpositionReport {
    bool pass = true;
    int fail_node = -1;
    int fail_curve = -1;
    std::string reason;
    double worst_measure_mismatch = 0.0;
    double worst_defect = 0.0;
};

/// Discrete superposition identity: the bundle's point set at every node must
/// reproduce the trajectory's empirical measure exactly, and the bundle as a
/// coupled system must satisfy the integrator's one-step equations within
/// defect_tol.
SuperpositionReport superposition_check(const TrajectoryBundle& bundle, const Trajectory& traj,
                                        const InteractionModel& model, const ControlSignal& u,
                                        double defect_tol = 1e-8);

struct SweepProblem {
    InteractionModel model;
    RunningCost running;
    ModeratedPenalty penalty;
    TimeGrid grid;
};

struct SweepConfig {
    SolverConfig solver;
    bool warm_start = true;  // lift the previous optimum through initial-point matching
    int ref_points = 0;      // reference quantization size; 0 = auto (1e4 in 1d, 1024 above)
    int sample_times = 5;    // nodes at which cross-N W1 distances are recorded
    int jobs = 1;            // parallel solves (cold-started sweeps only)
};

struct GammaSweepEntry {
    int N = 0;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
    double w1_init_to_ref = 0.0;
    double sup_w1_prev = 0.0;  // sup over sampled times vs the previous N's optimum
    double phi_moment_init = 0.0;
    double max_continuity_residual = 0.0;
    double moment_slack_min = 0.0;
    double wallclock_s = 0.0;
    bool failed = false;
    std::string error;
};

struct GammaSweepResult {
    std::vector<int> schedule;
    std::vector<GammaSweepEntry> entries;
    int ref_points = 0;
    std::string warm_start_policy;
    bool any_failed = false;
};

GammaSweepResult gamma_sweep(const SweepProblem& problem, const InitialMeasureSpec& mu0,
                             const std::vector<int>& schedule, const SweepConfig& config = {});

}  // namespace mfl
