#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mfl/linalg.hpp"

namespace mfl {

/// Strictly convex C^1 scalar function with phi(0)=phi'(0)=0, superlinear
/// growth and a doubling constant K with phi(2r) <= K(1+phi(r)).
struct AdmissibleFunction {
    std::string name;
    std::function<double(double)> eval;
    std::function<double(double)> deriv;
    double doubling_constant = 0.0;
    double superlinearity_r = 0.0;      // witness radius R
    double superlinearity_ratio = 0.0;  // phi(R)/R at the witness
};

/// phi(r) = r^p / p with exact doubling constant 2^p.
AdmissibleFunction make_power_reference(double p);

/// Convex control cost on a subspace U, sandwiched between an admissible
/// reference phi and C(1+phi). Evaluation and (sub)gradient act on
/// U-coordinates; the basis is orthonormal so norms agree with the ambient.
struct ModeratedPenalty {
    std::string name;
    Subspace subspace;
    AdmissibleFunction reference;
    double sandwich_constant = 1.0;
    std::function<double(std::span<const double>)> eval;
    std::function<void(std::span<const double>, std::span<double>)> grad;

    int dim() const { return subspace.dim(); }
};

ModeratedPenalty make_power_penalty(double p, Subspace subspace);
ModeratedPenalty make_hybrid_penalty(double p, Subspace subspace);

struct DoublingEstimate {
    double constant = 0.0;      // max over the grid of phi(2r)/(1+phi(r))
    bool unbounded = false;     // ratio still growing over the last decade
    double decade_growth = 0.0; // relative growth of the ratio, last decade vs previous
};

DoublingEstimate estimate_doubling_constant(const std::function<double(double)>& phi,
                                            double r_max, int n_grid);

/// theta*(s) = sup_{r>=0} s r - theta(r) by golden-section search; the search
/// interval is doubled until the maximizer is interior (at most 8 times).
double fenchel_conjugate(const AdmissibleFunction& theta, double s, double r_max = 16.0);

/// psi^n(x) = inf_y psi(y) + n theta(|x-y|), multi-start pattern search.
double inf_convolution(const std::function<double(std::span<const double>)>& psi,
                       const std::function<double(double)>& theta, int n,
                       std::span<const double> x);
double inf_convolution(const ModeratedPenalty& psi, const AdmissibleFunction& theta, int n,
                       std::span<const double> x);

struct AdmissibilityReport {
    struct Check {
        std::string name;
        bool pass = true;
        double worst_violation = 0.0;  // positive means violated by that much
        double worst_r = 0.0;
    };
    std::vector<Check> checks;
    double doubling_estimate = 0.0;
    bool doubling_unbounded = false;

    bool all_pass() const;
    const Check* find(const std::string& name) const;
};

/// Runs every AdmissibleFunction invariant on a uniform grid over [0, r_max].
AdmissibilityReport verify_admissible(const AdmissibleFunction& phi, double r_max, int n_grid);

}  // namespace mfl
