#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "mfl/measure.hpp"
#include "mfl/penalty.hpp"

namespace mfl {

struct AssignmentResult {
    double distance = 0.0;            // (1/N) sum |x_i - y_{perm[i]}|
    std::vector<int> permutation;     // row i of x matched to permutation[i] of y
};

/// d_N(x, y) = min over permutations of (1/N) sum |x_i - y_{sigma(i)}|,
/// solved exactly by shortest augmenting paths; equals W1 of the two
/// empirical measures.
AssignmentResult w1_assignment(const EmpiricalMeasure& x, const EmpiricalMeasure& y);

/// Exact W1 between weighted discrete measures (balanced transportation
/// problem with cost |x - y|). One-dimensional inputs take the monotone
/// coupling fast path.
std::pair<double, TransportPlan> w1_general(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

/// C_psi(mu, nu): transportation with ground cost psi(y - x) for a
/// nonnegative lower-semicontinuous psi given on R^d displacement vectors.
std::pair<double, TransportPlan> transport_cost(const std::function<double(std::span<const double>)>& psi,
                                                const DiscreteMeasure& mu, const DiscreteMeasure& nu);

/// Same, for a subspace-restricted moderated penalty: displacements outside U
/// get infinite cost and the plan is checked for feasibility.
std::pair<double, TransportPlan> transport_cost(const ModeratedPenalty& psi,
                                                const DiscreteMeasure& mu, const DiscreteMeasure& nu);

/// sum_j w_j theta(|x_j|).
double moment(const DiscreteMeasure& mu, const std::function<double(double)>& theta);

}  // namespace mfl
