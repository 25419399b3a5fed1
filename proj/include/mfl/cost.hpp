#pragma once

#include <functional>
#include <span>
#include <string>

#include "mfl/dynamics.hpp"
#include "mfl/measure.hpp"
#include "mfl/penalty.hpp"

namespace mfl {

/// Running cost L(x, mu) evaluated against the cohort's empirical measure.
/// mean_gradient differentiates the cohort mean (1/N) sum_i L(x_i, mu[x])
/// with respect to every state; when absent, central differences on eval are
/// used.
struct RunningCost {
    std::string name;
    bool is_zero = false;
    std::function<double(std::span<const double>, const DiscreteMeasure&)> eval;
    std::function<void(std::span<const double> states, int agents, std::span<double> grad)>
        mean_gradient;
};

RunningCost make_zero_cost();
/// |x - mean(mu)|^2, or the velocity variance |p - mean_p(mu)|^2 for
/// second-order states (q, p).
RunningCost make_variance_cost(InteractionModel::Structure order);
/// |x - target|^2, cohort-independent.
RunningCost make_tracking_cost(std::vector<double> target);

double mean_running_cost(const RunningCost& cost, std::span<const double> states, int agents,
                         int dim);
void mean_running_cost_gradient(const RunningCost& cost, std::span<const double> states,
                                int agents, int dim, std::span<double> grad);

struct CostReport {
    double running_term = 0.0;
    double penalty_term = 0.0;
    double total = 0.0;
    double per_agent_penalty_mean = 0.0;  // equals penalty_term for the discrete pair
    double measure_penalty = 0.0;         // time average of the grouped Psi(nu_t|mu_t)
    double jensen_gap = 0.0;              // per_agent_penalty_mean - measure_penalty
};

/// Normalized cost of a discrete pair: trapezoidal time quadrature on the
/// running term, exact piecewise-constant quadrature on the control penalty.
CostReport finite_cost(const Trajectory& traj, const ControlSignal& u, const RunningCost& cost,
                       const ModeratedPenalty& psi);

/// Psi(nu_t | mu_t) for one time slice: agents with coincident positions are
/// grouped (transitive closure within coincidence_tol) and each group
/// contributes (#J/N) psi(mean of controls over J). A negative tolerance
/// selects the default 1e-9*(1+cloud diameter).
double measure_penalty(std::span<const double> positions, int agents, int dim,
                       std::span<const double> controls, int control_dim,
                       const ModeratedPenalty& psi, double coincidence_tol = -1.0);

/// Per-agent mean of psi minus the grouped measure penalty; nonnegative by
/// convexity.
double jensen_gap(std::span<const double> positions, int agents, int dim,
                  std::span<const double> controls, int control_dim, const ModeratedPenalty& psi,
                  double coincidence_tol = -1.0);

}  // namespace mfl
