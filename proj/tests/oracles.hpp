#pragma once

// Independent reference implementations used only by the test suites. These
// deliberately avoid the library's solvers: brute force / dense LP / vertex
// enumeration / a scalar Riccati integrator.

#include <functional>
#include <span>
#include <vector>

#include "mfl/measure.hpp"

namespace oracle {

/// Exact d_N by enumeration of all permutations (N <= 9).
double brute_force_assignment(const mfl::EmpiricalMeasure& x, const mfl::EmpiricalMeasure& y);

/// min c.x subject to A x = b, x >= 0 by a dense two-phase tableau simplex
/// with Bland's rule. Throws on infeasibility.
double simplex_solve(std::vector<std::vector<double>> A, std::vector<double> b,
                     std::vector<double> c);

/// Transportation value via the dense simplex.
double lp_transport_value(const mfl::DiscreteMeasure& mu, const mfl::DiscreteMeasure& nu,
                          const std::function<double(std::span<const double>,
                                                     std::span<const double>)>& ground);

/// Transportation value by enumerating every basic feasible solution
/// (spanning trees of the bipartite support graph); practical for ~3x3.
double vertex_enumeration_transport(const mfl::DiscreteMeasure& mu, const mfl::DiscreteMeasure& nu,
                                    const std::function<double(std::span<const double>,
                                                               std::span<const double>)>& ground);

/// Per-agent value of the scalar tracking problem
///   min (1/T) int_0^T (x - a)^2 + u^2/2 dt,  xdot = u,  x(0) = x0,
/// through the Riccati equation P' = 2P^2 - 1, P(T) = 0, integrated by
/// Runge-Kutta; V(x0) = P(0) (x0 - a)^2 / T.
double riccati_value(double x0, double a, double T, int steps = 4000);

}  // namespace oracle
