#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mfl/measure.hpp"
#include "mfl/penalty.hpp"

namespace mfl {

struct TimeGrid {
    double horizon = 1.0;
    int steps = 1;

    double dt() const { return horizon / steps; }
    double node(int k) const { return horizon * k / steps; }
};

/// Piecewise-constant controls in U-coordinates, one value per interval
/// [t_k, t_{k+1}) and agent.
struct ControlSignal {
    int steps = 0;
    int agents = 0;
    int control_dim = 0;
    std::vector<double> values;  // steps*agents*control_dim

    static ControlSignal zeros(int steps, int agents, int control_dim);
    std::span<double> at(int k, int i) {
        return {values.data() + (static_cast<std::size_t>(k) * agents + i) * control_dim,
                static_cast<std::size_t>(control_dim)};
    }
    std::span<const double> at(int k, int i) const {
        return {values.data() + (static_cast<std::size_t>(k) * agents + i) * control_dim,
                static_cast<std::size_t>(control_dim)};
    }
};

struct Trajectory {
    TimeGrid grid;
    int agents = 0;
    int dim = 0;
    std::vector<double> states;  // (steps+1)*agents*dim

    std::span<const double> state(int k, int i) const {
        return {states.data() + (static_cast<std::size_t>(k) * agents + i) * dim,
                static_cast<std::size_t>(dim)};
    }
    std::span<const double> frame(int k) const {
        return {states.data() + static_cast<std::size_t>(k) * agents * dim,
                static_cast<std::size_t>(agents) * dim};
    }
    std::span<double> frame(int k) {
        return {states.data() + static_cast<std::size_t>(k) * agents * dim,
                static_cast<std::size_t>(agents) * dim};
    }
    DiscreteMeasure measure_at(int k) const;
};

/// Kernel-induced symmetric interaction field: F(x, mu) = int K(x,y) dmu(y).
/// A null kernel means F == 0. Kernel Jacobians (d x d, row-major, wrt x and
/// y) are optional; central differences on K are used when absent.
struct InteractionModel {
    enum class Structure { first_order, second_order };

    std::string name;
    int dim = 0;
    Structure structure = Structure::first_order;
    double growth_A = 0.0;
    double growth_B = 0.0;
    Subspace control_subspace;
    std::function<void(std::span<const double>, std::span<const double>, std::span<double>)> kernel;
    std::function<void(std::span<const double>, std::span<const double>, double*, double*)> kernel_jacobian;
    std::string growth_warning;  // set when a sampled growth check failed at construction
};

void eval_field(const InteractionModel& model, std::span<const double> x,
                const DiscreteMeasure& cohort, std::span<double> out);
std::vector<double> eval_field(const InteractionModel& model, std::span<const double> x,
                               const DiscreteMeasure& cohort);

/// out[i] = (1/N) sum_j K(x_i, x_j) for a uniform cohort given as a flat
/// (agents*dim) state frame.
void cohort_field(const InteractionModel& model, std::span<const double> states, int agents,
                  std::span<double> out);

/// Accumulates the transpose-Jacobian action of cohort_field:
/// out_j += sum_i (dF_i/dx_j)^T g_i.
void cohort_field_vjp(const InteractionModel& model, std::span<const double> states, int agents,
                      std::span<const double> g, std::span<double> out);

InteractionModel make_zero_model(int dim);
InteractionModel make_kernel_model(
    std::string name, int dim,
    std::function<void(std::span<const double>, std::span<const double>, std::span<double>)> kernel,
    std::function<void(std::span<const double>, std::span<const double>, double*, double*)> jacobian,
    double growth_A, double growth_B);
/// First-order K(x,y) = -(x - y): pairwise linear attraction.
InteractionModel make_linear_attraction(int dim);
/// Alignment with rate a(r) = (1+r^2)^-gamma acting on velocities; states are
/// (q, p) in R^{2m} and controls live on the velocity block.
InteractionModel make_cucker_smale(double gamma, int m);
/// F_2 = -alpha p - sum_j w_j grad W(p - p_j); quadratic W by default.
InteractionModel make_friction_alignment(
    double alpha, int m,
    std::function<void(std::span<const double>, std::span<double>)> w_grad = nullptr,
    std::function<void(std::span<const double>, double*)> w_hess = nullptr);

struct BlowUpError : std::runtime_error {
    int step;
    explicit BlowUpError(int step_index);
};

/// Stage data of one Runge-Kutta step; kept so the adjoint sweep can
/// recompute and differentiate the exact forward arithmetic.
struct RK4Stages {
    std::vector<double> k1, k2, k3, k4, x2, x3, x4;
    void resize(std::size_t n);
};

/// One step of dx/dt = F(x) + v with v frozen: fills the stages and writes
/// state + h/6 (k1 + 2k2 + 2k3 + k4) into next.
void rk4_forward(const InteractionModel& model, std::span<const double> state,
                 std::span<const double> v, int agents, double h, RK4Stages& stages,
                 std::span<double> next);

/// Embeds the controls of interval k into ambient R^d, one block per agent.
void embed_controls(const Subspace& u_space, const ControlSignal& u, int k, int agents,
                    std::span<double> v);

/// Classical four-stage Runge-Kutta on the coupled agent system, control held
/// at its interval value. Throws BlowUpError on non-finite states.
Trajectory integrate(const InteractionModel& model, std::span<const double> x0, int agents,
                     const ControlSignal& u, const TimeGrid& grid);

struct MomentBoundReport {
    double sup_norm = 0.0;  // sup_k |x(t_k)|_N
    double bound = 0.0;     // (|x(0)|_N + AT + int |u|_N) e^{2BT}
    double slack = 0.0;     // bound - sup_norm
    bool pass = false;
};
MomentBoundReport check_moment_bound(const Trajectory& traj, const ControlSignal& u, double A,
                                     double B);

struct ThetaMomentReport {
    double sup_moment = 0.0;
    double initial_moment = 0.0;
    double field_bound = 0.0;    // M with |F(x,mu_t)| <= M(1+|x|)
    double gronwall_rate = 0.0;  // C' = 2MK + K + 1
    double log_bound = 0.0;      // log of C(1 + initial_moment), C = e^{C'T}(1+C'T)
    double ratio = 0.0;          // sup_moment / bound (underflows to 0 for huge bounds)
    bool pass = false;
};
ThetaMomentReport check_theta_moment(const Trajectory& traj, const ControlSignal& u,
                                     const AdmissibleFunction& theta, double A, double B);

struct GrowthReport {
    bool pass = true;
    double worst_excess = 0.0;  // max of |K(x,y)| - (A + B(|x|+|y|)) over samples
};
GrowthReport check_growth(const InteractionModel& model, double box_radius, int n_samples,
                          std::uint64_t seed);

struct CompatibilityReport {
    bool pass = true;
    double worst_offspace = 0.0;  // max |P_{U^perp}(F(x,.) - F(x,..))| over samples
};
/// Samples pairs of cohorts and checks F(x, mu) - F(x, nu) lies in U.
CompatibilityReport check_compatibility(const InteractionModel& model, double box_radius,
                                        int n_samples, std::uint64_t seed);

}  // namespace mfl
