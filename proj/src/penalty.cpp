#include "mfl/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace mfl {

AdmissibleFunction make_power_reference(double p) {
    if (p <= 1.0) throw std::invalid_argument("make_power_reference: need p > 1");
    AdmissibleFunction f;
    f.name = "power_p" + std::to_string(p);
    f.eval = [p](double r) { return std::pow(r, p) / p; };
    f.deriv = [p](double r) { return std::pow(r, p - 1.0); };
    f.doubling_constant = std::pow(2.0, p);
    f.superlinearity_r = 1e3;
    f.superlinearity_ratio = std::pow(1e3, p - 1.0) / p;
    return f;
}

ModeratedPenalty make_power_penalty(double p, Subspace subspace) {
    if (p <= 1.0) throw std::invalid_argument("make_power_penalty: need p > 1 (superlinearity)");
    ModeratedPenalty psi;
    psi.name = "power_p" + std::to_string(p);
    psi.subspace = std::move(subspace);
    psi.reference = make_power_reference(p);
    psi.sandwich_constant = 1.0;
    psi.eval = [p](std::span<const double> u) { return std::pow(norm(u), p) / p; };
    psi.grad = [p](std::span<const double> u, std::span<double> g) {
        const double r = norm(u);
        if (r == 0.0) {
            std::fill(g.begin(), g.end(), 0.0);
            return;
        }
        const double s = std::pow(r, p - 2.0);
        for (std::size_t i = 0; i < u.size(); ++i) g[i] = s * u[i];
    };
    return psi;
}

ModeratedPenalty make_hybrid_penalty(double p, Subspace subspace) {
    if (p <= 1.0) throw std::invalid_argument("make_hybrid_penalty: need p > 1 (superlinearity)");
    ModeratedPenalty psi;
    psi.name = "hybrid_p" + std::to_string(p);
    psi.subspace = std::move(subspace);
    psi.reference = make_power_reference(p);
    psi.sandwich_constant = 1.0;
    psi.eval = [p](std::span<const double> u) {
        const double r = norm(u);
        return r <= 1.0 ? r / p : std::pow(r, p) / p;
    };
    // Kink at the origin: returns the zero subgradient there.
    psi.grad = [p](std::span<const double> u, std::span<double> g) {
        const double r = norm(u);
        if (r == 0.0) {
            std::fill(g.begin(), g.end(), 0.0);
            return;
        }
        const double s = (r <= 1.0 ? 1.0 / (p * r) : std::pow(r, p - 2.0));
        for (std::size_t i = 0; i < u.size(); ++i) g[i] = s * u[i];
    };
    return psi;
}

DoublingEstimate estimate_doubling_constant(const std::function<double(double)>& phi,
                                            double r_max, int n_grid) {
    if (n_grid < 16) throw std::invalid_argument("estimate_doubling_constant: need n_grid >= 16");
    if (r_max <= 0.0) throw std::invalid_argument("estimate_doubling_constant: need r_max > 0");
    const double phi0 = phi(0.0);
    if (!std::isfinite(phi0) || std::abs(phi0) > 1e-12)
        throw std::invalid_argument("estimate_doubling_constant: phi(0) must be 0");

    // Geometric grid over six decades ending exactly at r_max, so the ratio's
    // tail behaviour is visible decade by decade.
    const double r_min = r_max * 1e-6;
    const double step = std::pow(r_max / r_min, 1.0 / (n_grid - 1));
    DoublingEstimate est;
    double max_last = 0.0, max_prev = 0.0;
    double r = r_min;
    for (int i = 0; i < n_grid; ++i) {
        if (i == n_grid - 1) r = r_max;
        const double num = phi(2.0 * r), den = 1.0 + phi(r);
        if (!std::isfinite(num) || !std::isfinite(den))
            throw std::invalid_argument("estimate_doubling_constant: non-finite phi value");
        const double ratio = num / den;
        est.constant = std::max(est.constant, ratio);
        if (r > r_max / 10.0)
            max_last = std::max(max_last, ratio);
        else if (r > r_max / 100.0)
            max_prev = std::max(max_prev, ratio);
        r *= step;
    }
    est.decade_growth = max_prev > 0.0 ? max_last / max_prev - 1.0 : 0.0;
    est.unbounded = est.decade_growth > 0.05;
    return est;
}

namespace {

// Golden-section maximization of a concave function on [a, b].
double golden_max(const std::function<double(double)>& g, double a, double b, double* arg) {
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    const double tol = 1e-12 * (1.0 + b);
    double c = b - invphi * (b - a), d = a + invphi * (b - a);
    double gc = g(c), gd = g(d);
    while (b - a > tol) {
        if (gc > gd) {
            b = d;
            d = c;
            gd = gc;
            c = b - invphi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + invphi * (b - a);
            gd = g(d);
        }
    }
    const double r = 0.5 * (a + b);
    if (arg) *arg = r;
    return g(r);
}

}  // namespace

double fenchel_conjugate(const AdmissibleFunction& theta, double s, double r_max) {
    if (s < 0.0) throw std::invalid_argument("fenchel_conjugate: need s >= 0");
    if (r_max <= 0.0) r_max = 1.0;
    auto objective = [&](double r) { return s * r - theta.eval(r); };
    double upper = r_max;
    for (int attempt = 0; attempt <= 8; ++attempt) {
        double arg = 0.0;
        const double value = golden_max(objective, 0.0, upper, &arg);
        if (arg < 0.99 * upper) return std::max(value, 0.0);
        upper *= 2.0;
    }
    throw std::runtime_error("fenchel_conjugate: maximizer pinned at the boundary (conjugate unbounded?)");
}

namespace {

// Compass pattern search with coordinate and pairwise-diagonal directions.
// The objective is convex, so a local minimum is global; diagonals guard the
// kink of theta(|x-y|) at y = x.
double pattern_search(const std::function<double(std::span<const double>)>& f,
                      std::vector<double> y, double step, double step_tol) {
    const int m = static_cast<int>(y.size());
    double fy = f(y);
    std::vector<double> trial(m);
    while (step > step_tol) {
        bool improved = false;
        auto try_direction = [&](auto&& fill) {
            fill(trial);
            const double ft = f(trial);
            if (ft < fy - 1e-15 * (1.0 + std::abs(fy))) {
                y = trial;
                fy = ft;
                improved = true;
            }
        };
        for (int c = 0; c < m; ++c) {
            for (double sgn : {1.0, -1.0}) {
                try_direction([&](std::vector<double>& t) {
                    t = y;
                    t[c] += sgn * step;
                });
            }
        }
        if (m <= 4) {
            const double diag = step / std::sqrt(2.0);
            for (int c = 0; c < m; ++c)
                for (int c2 = c + 1; c2 < m; ++c2)
                    for (double s1 : {1.0, -1.0})
                        for (double s2 : {1.0, -1.0}) {
                            try_direction([&](std::vector<double>& t) {
                                t = y;
                                t[c] += s1 * diag;
                                t[c2] += s2 * diag;
                            });
                        }
        }
        if (!improved) step *= 0.5;
    }
    return fy;
}

}  // namespace

double inf_convolution(const std::function<double(std::span<const double>)>& psi,
                       const std::function<double(double)>& theta, int n,
                       std::span<const double> x) {
    if (n < 1) throw std::invalid_argument("inf_convolution: need n >= 1");
    const int m = static_cast<int>(x.size());
    const double psi_x = psi(x);
    if (!std::isfinite(psi_x)) throw std::invalid_argument("inf_convolution: psi(x) not finite");

    // Any minimizer satisfies n*theta(|x-y|) <= psi(x), which bounds the
    // search box through the growth of theta.
    double reach = 1.0;
    while (n * theta(reach) <= psi_x + 1.0 && reach < 1e12) reach *= 2.0;
    const double box = norm(x) + reach;

    auto objective = [&](std::span<const double> y) {
        double r = 0.0;
        for (int c = 0; c < m; ++c) {
            const double d = x[c] - y[c];
            r += d * d;
        }
        return psi(y) + n * theta(std::sqrt(r));
    };

    std::vector<std::vector<double>> starts;
    starts.emplace_back(x.begin(), x.end());
    starts.emplace_back(m, 0.0);
    std::mt19937_64 rng(0x1f2e3d4c5b6a79ULL);  // fixed seed: the operation is deterministic
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int k = 0; k < 7; ++k) {
        std::vector<double> y(m);
        double r = 0.0;
        for (int c = 0; c < m; ++c) {
            y[c] = normal(rng);
            r += y[c] * y[c];
        }
        r = std::sqrt(r);
        const double scale = (0.1 + 0.15 * k) * box / (r > 0.0 ? r : 1.0);
        for (int c = 0; c < m; ++c) y[c] = x[c] * 0.5 + scale * y[c];
        starts.push_back(std::move(y));
    }

    double best = std::numeric_limits<double>::infinity();
    const double step_tol = 1e-10 * (1.0 + box);
    for (auto& y0 : starts)
        best = std::min(best, pattern_search(objective, y0, std::max(box / 4.0, 1e-6), step_tol));
    return best;
}

double inf_convolution(const ModeratedPenalty& psi, const AdmissibleFunction& theta, int n,
                       std::span<const double> x) {
    if (static_cast<int>(x.size()) != psi.dim())
        throw std::invalid_argument("inf_convolution: point dimension does not match the subspace");
    return inf_convolution(psi.eval, theta.eval, n, x);
}

bool AdmissibilityReport::all_pass() const {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return true;
}

const AdmissibilityReport::Check* AdmissibilityReport::find(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

AdmissibilityReport verify_admissible(const AdmissibleFunction& phi, double r_max, int n_grid) {
    if (n_grid < 64) throw std::invalid_argument("verify_admissible: need n_grid >= 64");
    AdmissibilityReport report;
    std::vector<double> rs(n_grid), fs(n_grid), ds(n_grid);
    for (int i = 0; i < n_grid; ++i) {
        rs[i] = r_max * i / (n_grid - 1);
        fs[i] = phi.eval(rs[i]);
        ds[i] = phi.deriv(rs[i]);
    }

    auto add = [&](std::string name, double worst, double at, double tol) {
        report.checks.push_back({std::move(name), worst <= tol, worst, at});
    };

    add("zero_at_origin", std::max(std::abs(fs[0]), std::abs(ds[0])), 0.0, 1e-12);

    // Strict midpoint convexity over all sampled pairs.
    double worst_cvx = -std::numeric_limits<double>::infinity();
    double at_cvx = 0.0;
    for (int i = 0; i < n_grid; ++i)
        for (int j = i + 1; j < n_grid; ++j) {
            const double gap = phi.eval(0.5 * (rs[i] + rs[j])) - 0.5 * (fs[i] + fs[j]);
            if (gap > worst_cvx) {
                worst_cvx = gap;
                at_cvx = 0.5 * (rs[i] + rs[j]);
            }
        }
    // gap must be strictly negative for distinct points
    report.checks.push_back({"strict_convexity", worst_cvx < 0.0, worst_cvx, at_cvx});

    const double K = phi.doubling_constant;
    double worst_dbl = -std::numeric_limits<double>::infinity(), at_dbl = 0.0;
    double worst_chain = -std::numeric_limits<double>::infinity(), at_chain = 0.0;
    for (int i = 0; i < n_grid; ++i) {
        const double f2 = phi.eval(2.0 * rs[i]);
        const double cap = K * (1.0 + fs[i]);
        const double scale = 1.0 + std::abs(cap);
        const double dbl = (f2 - cap) / scale;
        if (dbl > worst_dbl) {
            worst_dbl = dbl;
            at_dbl = rs[i];
        }
        // 0 <= phi <= r phi' <= phi(2r) - phi(r) <= K(1+phi)
        const double links[4] = {-fs[i], fs[i] - rs[i] * ds[i], rs[i] * ds[i] - (f2 - fs[i]),
                                 (f2 - fs[i]) - cap};
        for (double link : links) {
            const double rel = link / scale;
            if (rel > worst_chain) {
                worst_chain = rel;
                at_chain = rs[i];
            }
        }
    }
    add("doubling", worst_dbl, at_dbl, 1e-9);
    add("chain_inequality", worst_chain, at_chain, 1e-9);

    double worst_mono = -std::numeric_limits<double>::infinity(), at_mono = 0.0;
    for (int i = 0; i + 1 < n_grid; ++i) {
        const double v = -(ds[i + 1] - ds[i]) * (rs[i + 1] - rs[i]);
        if (v > worst_mono) {
            worst_mono = v;
            at_mono = rs[i];
        }
    }
    add("derivative_monotone", worst_mono, at_mono, 0.0);

    // Superlinearity proxy: phi(r)/r must grow by 10x over the last decade.
    {
        const double hi = phi.eval(r_max) / r_max;
        const double lo = phi.eval(r_max / 10.0) / (r_max / 10.0);
        const double deficit = 10.0 * lo - hi;
        report.checks.push_back(
            {"superlinearity", deficit <= 1e-9 * (1.0 + std::abs(hi)), deficit, r_max});
    }
    if (phi.superlinearity_r > 0.0) {
        const double have = phi.eval(phi.superlinearity_r) / phi.superlinearity_r;
        add("superlinearity_witness", phi.superlinearity_ratio - have, phi.superlinearity_r,
            1e-9 * (1.0 + std::abs(have)));
    }

    const auto est = estimate_doubling_constant(phi.eval, r_max, std::max(n_grid, 256));
    report.doubling_estimate = est.constant;
    report.doubling_unbounded = est.unbounded;
    report.checks.push_back({"doubling_bounded", !est.unbounded, est.decade_growth, r_max});
    return report;
}

}  // namespace mfl
