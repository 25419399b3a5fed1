#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mfl/cost.hpp"
#include "mfl/dynamics.hpp"

namespace mfl {

struct OCPSpec {
    InteractionModel model;
    std::vector<double> x0;  // agents*dim
    int agents = 0;
    TimeGrid grid;
    RunningCost running;
    ModeratedPenalty penalty;

    void validate() const;
};

struct SolverConfig {
    int max_iters = 500;
    double grad_tol = 1e-6;      // on the sup-norm, scaled by 1 + |value|
    double armijo_c = 1e-4;      // sufficient-decrease constant
    double backtrack = 0.5;      // step contraction
    int max_backtracks = 40;
    int memory = 10;             // quasi-Newton pair count
    std::vector<double> init_control;  // flat M*N*m; empty means zero start
};

enum class SolveStatus { converged, max_iters, stalled };

struct Solution {
    ControlSignal control;
    Trajectory traj;
    CostReport cost;
    double value = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    SolveStatus status = SolveStatus::max_iters;
    bool converged = false;
    std::vector<std::pair<double, double>> history;  // (value, grad_norm) per iterate
    double moment_slack_min = 0.0;  // worst moment-bound slack over accepted iterates
};

/// Value of the transcribed cost together with its exact gradient with
/// respect to every control coordinate, from a reverse sweep through the
/// Runge-Kutta stages.
std::pair<double, std::vector<double>> cost_and_gradient(const OCPSpec& spec,
                                                         const ControlSignal& u);

/// Limited-memory quasi-Newton descent with backtracking line search.
Solution solve(const OCPSpec& spec, const SolverConfig& config = {});

/// Max relative error of the adjoint gradient against central differences on
/// n_probes random control coordinates.
double fd_gradient_check(const OCPSpec& spec, const ControlSignal& u, double step, int n_probes,
                         std::uint64_t seed = 0x5eed11);

}  // namespace mfl
