#include "mfl/meanfield.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <limits>
#include <random>

namespace mfl {

namespace {

double std_normal_cdf(double t) { return 0.5 * (1.0 + std::erf(t / std::sqrt(2.0))); }

// Inverse CDF of a one-dimensional truncated gaussian by bisection.
double truncated_gaussian_quantile(double mean, double sigma, double radius, double q) {
    const double a = mean - radius, b = mean + radius;
    const double Fa = std_normal_cdf((a - mean) / sigma), Fb = std_normal_cdf((b - mean) / sigma);
    double lo = a, hi = b;
    for (int it = 0; it < 200 && hi - lo > 1e-14 * (1.0 + radius); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double F = (std_normal_cdf((mid - mean) / sigma) - Fa) / (Fb - Fa);
        (F < q ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct Marginal {
    double extent;                                 // support width, for factor balancing
    std::function<double(double)> quantile;        // inverse CDF on (0,1)
};

std::vector<Marginal> marginals_of(const InitialMeasureSpec& spec) {
    std::vector<Marginal> ms;
    for (int a = 0; a < spec.dim; ++a) {
        Marginal m;
        if (spec.kind == InitialMeasureSpec::Kind::uniform_box) {
            const double lo = spec.lo[a], hi = spec.hi[a];
            m.extent = hi - lo;
            m.quantile = [lo, hi](double q) { return lo + (hi - lo) * q; };
        } else {
            const double mean = spec.mean[a], sigma = spec.sigma[a], radius = spec.radius;
            m.extent = 2.0 * radius;
            m.quantile = [mean, sigma, radius](double q) {
                return truncated_gaussian_quantile(mean, sigma, radius, q);
            };
        }
        ms.push_back(std::move(m));
    }
    return ms;
}

// All factorizations of N into exactly d factors >= 2 (order matters).
void factorizations(int n, int d, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
    if (d == 1) {
        if (n >= 2 || (n == 1 && cur.empty())) {
            cur.push_back(n);
            out.push_back(cur);
            cur.pop_back();
        }
        return;
    }
    for (int f = 2; f <= n / 2; ++f) {
        if (n % f != 0) continue;
        cur.push_back(f);
        factorizations(n / f, d - 1, cur, out);
        cur.pop_back();
    }
}

void validate_spec(const InitialMeasureSpec& spec) {
    if (spec.dim < 1) throw std::invalid_argument("InitialMeasureSpec: need dim >= 1");
    switch (spec.kind) {
        case InitialMeasureSpec::Kind::uniform_box:
            if (static_cast<int>(spec.lo.size()) != spec.dim ||
                static_cast<int>(spec.hi.size()) != spec.dim)
                throw std::invalid_argument("InitialMeasureSpec: box bounds shape mismatch");
            for (int a = 0; a < spec.dim; ++a)
                if (!(spec.lo[a] < spec.hi[a]))
                    throw std::invalid_argument("InitialMeasureSpec: empty box");
            break;
        case InitialMeasureSpec::Kind::gaussian_truncated:
            if (static_cast<int>(spec.mean.size()) != spec.dim ||
                static_cast<int>(spec.sigma.size()) != spec.dim || spec.radius <= 0.0)
                throw std::invalid_argument("InitialMeasureSpec: gaussian parameters missing");
            break;
        case InitialMeasureSpec::Kind::points:
            if (spec.points.empty() || spec.points.size() % spec.dim != 0)
                throw std::invalid_argument("InitialMeasureSpec: bad point list");
            break;
    }
}

}  // namespace

std::vector<double> quantize(const InitialMeasureSpec& spec, int N) {
    validate_spec(spec);
    if (N < 1) throw std::invalid_argument("quantize: need N >= 1");
    const int d = spec.dim;

    if (spec.kind == InitialMeasureSpec::Kind::points) {
        if (N * d != static_cast<int>(spec.points.size()))
            throw std::invalid_argument("quantize: N does not match the explicit point list");
        return spec.points;
    }

    const auto ms = marginals_of(spec);
    if (d == 1) {
        std::vector<double> pts(N);
        for (int j = 0; j < N; ++j) pts[j] = ms[0].quantile((j + 0.5) / N);
        return pts;
    }

    // Product measure: balanced tensor grid of marginal midpoint quantiles
    // when N factors into d parts >= 2 (N = 1 is the all-medians point).
    std::vector<std::vector<int>> facs;
    std::vector<int> cur;
    if (N == 1) facs.push_back(std::vector<int>(d, 1));
    factorizations(N, d, cur, facs);
    if (!facs.empty()) {
        double best_score = std::numeric_limits<double>::infinity();
        std::vector<int> best;
        for (const auto& f : facs) {
            double score = 0.0;
            for (int a = 0; a < d; ++a) score += ms[a].extent / (4.0 * f[a]);
            if (score < best_score - 1e-15) {
                best_score = score;
                best = f;
            }
        }
        std::vector<double> pts(static_cast<std::size_t>(N) * d);
        std::vector<int> idx(d, 0);
        for (int j = 0; j < N; ++j) {
            for (int a = 0; a < d; ++a)
                pts[static_cast<std::size_t>(j) * d + a] =
                    ms[a].quantile((idx[a] + 0.5) / best[a]);
            for (int a = d - 1; a >= 0; --a) {
                if (++idx[a] < best[a]) break;
                idx[a] = 0;
            }
        }
        return pts;
    }

    // No balanced factorization: seeded i.i.d. sampling through the quantile.
    std::mt19937_64 rng(spec.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(N)));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> pts(static_cast<std::size_t>(N) * d);
    for (int j = 0; j < N; ++j)
        for (int a = 0; a < d; ++a) pts[static_cast<std::size_t>(j) * d + a] = ms[a].quantile(unif(rng));
    return pts;
}

double reference_moment(const InitialMeasureSpec& spec, int n_ref,
                        const std::function<double(std::span<const double>)>& f) {
    const auto pts = quantize(spec, n_ref);
    const int d = spec.dim;
    double s = 0.0;
    for (int j = 0; j < n_ref; ++j)
        s += f(std::span<const double>{pts.data() + static_cast<std::size_t>(j) * d,
                                       static_cast<std::size_t>(d)});
    return s / n_ref;
}

std::vector<TestFunction> default_dictionary(int dim, double radius, std::uint64_t seed) {
    std::vector<TestFunction> dict;
    const double R2 = radius * radius;
    auto damp = [R2](std::span<const double> x) {
        double r2 = 0.0;
        for (double v : x) r2 += v * v;
        return std::exp(-r2 / (2.0 * R2));
    };
    for (int a = 0; a < dim; ++a) {
        TestFunction f;
        f.name = "damped_coordinate_" + std::to_string(a);
        f.eval = [a, damp](std::span<const double> x) { return x[a] * damp(x); };
        f.grad = [a, damp, R2](std::span<const double> x, std::span<double> g) {
            const double w = damp(x);
            for (std::size_t b = 0; b < x.size(); ++b) g[b] = -x[a] * x[b] / R2 * w;
            g[a] += w;
        };
        dict.push_back(std::move(f));

        TestFunction q;
        q.name = "damped_square_" + std::to_string(a);
        q.eval = [a, damp](std::span<const double> x) { return x[a] * x[a] * damp(x); };
        q.grad = [a, damp, R2](std::span<const double> x, std::span<double> g) {
            const double w = damp(x);
            for (std::size_t b = 0; b < x.size(); ++b) g[b] = -x[a] * x[a] * x[b] / R2 * w;
            g[a] += 2.0 * x[a] * w;
        };
        dict.push_back(std::move(q));
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-0.5 * radius, 0.5 * radius);
    for (int b = 0; b < 2; ++b) {
        auto center = std::make_shared<std::vector<double>>(dim);
        for (auto& c : *center) c = unif(rng);
        const double s2 = 0.25 * R2;
        TestFunction f;
        f.name = "radial_bump_" + std::to_string(b);
        f.eval = [center, s2](std::span<const double> x) {
            double r2 = 0.0;
            for (std::size_t a = 0; a < x.size(); ++a) {
                const double v = x[a] - (*center)[a];
                r2 += v * v;
            }
            return std::exp(-r2 / (2.0 * s2));
        };
        f.grad = [center, s2](std::span<const double> x, std::span<double> g) {
            double r2 = 0.0;
            for (std::size_t a = 0; a < x.size(); ++a) {
                const double v = x[a] - (*center)[a];
                r2 += v * v;
            }
            const double w = std::exp(-r2 / (2.0 * s2));
            for (std::size_t a = 0; a < x.size(); ++a) g[a] = -(x[a] - (*center)[a]) / s2 * w;
        };
        dict.push_back(std::move(f));
    }
    return dict;
}

double continuity_residual(const Trajectory& traj, const ControlSignal& u,
                           const InteractionModel& model,
                           const std::vector<TestFunction>& dictionary) {
    const int M = traj.grid.steps, N = traj.agents, d = traj.dim;
    const double h = traj.grid.dt();
    const std::size_t nd = static_cast<std::size_t>(N) * d;

    // Field at every node, then per interval the frozen-control velocity at
    // both ends and a cubic-Hermite midpoint state for Simpson quadrature.
    std::vector<std::vector<double>> field(M + 1, std::vector<double>(nd));
    for (int k = 0; k <= M; ++k) cohort_field(model, traj.frame(k), N, field[k]);

    std::vector<double> v(nd), fa(nd), fb(nd), xmid(nd), fmid(nd), grad(d);
    auto pairing = [&](std::span<const double> states, std::span<const double> vel,
                       const TestFunction& zeta) {
        double s = 0.0;
        for (int i = 0; i < N; ++i) {
            const std::span<const double> xi{states.data() + static_cast<std::size_t>(i) * d,
                                             static_cast<std::size_t>(d)};
            zeta.grad(xi, grad);
            for (int a = 0; a < d; ++a) s += vel[static_cast<std::size_t>(i) * d + a] * grad[a];
        }
        return s / N;
    };
    auto mean_zeta = [&](std::span<const double> states, const TestFunction& zeta) {
        double s = 0.0;
        for (int i = 0; i < N; ++i)
            s += zeta.eval(std::span<const double>{states.data() + static_cast<std::size_t>(i) * d,
                                                   static_cast<std::size_t>(d)});
        return s / N;
    };

    double worst = 0.0;
    for (int k = 0; k < M; ++k) {
        embed_controls(model.control_subspace, u, k, N, v);
        for (std::size_t a = 0; a < nd; ++a) {
            fa[a] = field[k][a] + v[a];
            fb[a] = field[k + 1][a] + v[a];
        }
        const auto xk = traj.frame(k);
        const auto xk1 = traj.frame(k + 1);
        for (std::size_t a = 0; a < nd; ++a)
            xmid[a] = 0.5 * (xk[a] + xk1[a]) + 0.125 * h * (fa[a] - fb[a]);
        cohort_field(model, xmid, N, fmid);
        for (std::size_t a = 0; a < nd; ++a) fmid[a] += v[a];

        for (const auto& zeta : dictionary) {
            const double lhs = (mean_zeta(xk1, zeta) - mean_zeta(xk, zeta)) / h;
            const double rhs = (pairing(xk, fa, zeta) + 4.0 * pairing(xmid, fmid, zeta) +
                                pairing(xk1, fb, zeta)) /
                               6.0;
            worst = std::max(worst, std::abs(lhs - rhs));
        }
    }
    return worst;
}

double ControlMeasure::total_variation() const {
    double s = 0.0;
    for (int a = 0; a < atoms(); ++a)
        s += masses[a] * norm(std::span<const double>{
                            controls.data() + static_cast<std::size_t>(a) * dim,
                            static_cast<std::size_t>(dim)});
    return s;
}

ControlMeasure build_control_measure(const Trajectory& traj, const ControlSignal& u,
                                     const Subspace& control_subspace) {
    const int M = traj.grid.steps, N = traj.agents, d = traj.dim;
    ControlMeasure nu;
    nu.dim = d;
    const int n_atoms = M * N;
    nu.times.reserve(n_atoms);
    nu.positions.reserve(static_cast<std::size_t>(n_atoms) * d);
    nu.controls.reserve(static_cast<std::size_t>(n_atoms) * d);
    nu.masses.assign(n_atoms, 1.0 / n_atoms);  // dt/(T N)
    std::vector<double> vi(d);
    for (int k = 0; k < M; ++k)
        for (int i = 0; i < N; ++i) {
            nu.times.push_back(traj.grid.node(k));
            const auto xi = traj.state(k, i);
            nu.positions.insert(nu.positions.end(), xi.begin(), xi.end());
            control_subspace.embed(u.at(k, i), vi);
            nu.controls.insert(nu.controls.end(), vi.begin(), vi.end());
        }
    return nu;
}

double weakstar_pairing(const ControlMeasure& nu,
                        const std::function<void(double, std::span<const double>, std::span<double>)>& xi) {
    std::vector<double> field(nu.dim);
    double s = 0.0;
    for (int a = 0; a < nu.atoms(); ++a) {
        const std::span<const double> x{nu.positions.data() + static_cast<std::size_t>(a) * nu.dim,
                                        static_cast<std::size_t>(nu.dim)};
        const std::span<const double> ua{nu.controls.data() + static_cast<std::size_t>(a) * nu.dim,
                                         static_cast<std::size_t>(nu.dim)};
        xi(nu.times[a], x, field);
        s += nu.masses[a] * dot(field, ua);
    }
    return s;
}

TrajectoryBundle TrajectoryBundle::from_trajectory(const Trajectory& traj) {
    TrajectoryBundle b;
    b.grid = traj.grid;
    b.dim = traj.dim;
    b.curves.resize(traj.agents);
    for (int i = 0; i < traj.agents; ++i) {
        auto& c = b.curves[i];
        c.resize(static_cast<std::size_t>(traj.grid.steps + 1) * traj.dim);
        for (int k = 0; k <= traj.grid.steps; ++k) {
            const auto s = traj.state(k, i);
            std::copy(s.begin(), s.end(), c.begin() + static_cast<std::size_t>(k) * traj.dim);
        }
    }
    return b;
}

SuperpositionReport superposition_check(const TrajectoryBundle& bundle, const Trajectory& traj,
                                        const InteractionModel& model, const ControlSignal& u,
                                        double defect_tol) {
    SuperpositionReport rep;
    const int M = traj.grid.steps, N = traj.agents, d = traj.dim;
    if (static_cast<int>(bundle.curves.size()) != N || bundle.dim != d ||
        bundle.grid.steps != M) {
        rep.pass = false;
        rep.reason = "shape mismatch";
        return rep;
    }

    // Empirical-measure identity at every node: identical sorted point sets.
    auto sorted_frame = [d](std::vector<std::vector<double>> pts) {
        std::sort(pts.begin(), pts.end());
        std::vector<double> flat;
        flat.reserve(pts.size() * d);
        for (auto& p : pts) flat.insert(flat.end(), p.begin(), p.end());
        return flat;
    };
    for (int k = 0; k <= M; ++k) {
        std::vector<std::vector<double>> a(N), b(N);
        for (int i = 0; i < N; ++i) {
            const auto s = traj.state(k, i);
            a[i].assign(s.begin(), s.end());
            const double* c = bundle.curves[i].data() + static_cast<std::size_t>(k) * d;
            b[i].assign(c, c + d);
        }
        const auto fa = sorted_frame(std::move(a)), fb = sorted_frame(std::move(b));
        double diff = 0.0;
        for (std::size_t j = 0; j < fa.size(); ++j) diff = std::max(diff, std::abs(fa[j] - fb[j]));
        rep.worst_measure_mismatch = std::max(rep.worst_measure_mismatch, diff);
        if (diff != 0.0 && rep.pass) {
            rep.pass = false;
            rep.fail_node = k;
            rep.reason = "empirical measure mismatch";
        }
    }

    // Each curve must solve the sampled system: one integrator step from the
    // bundle's own frame must reproduce the next frame within defect_tol.
    const double h = traj.grid.dt();
    const std::size_t nd = static_cast<std::size_t>(N) * d;
    std::vector<double> frame(nd), next(nd), v(nd);
    RK4Stages st;
    for (int k = 0; k < M; ++k) {
        for (int i = 0; i < N; ++i)
            std::copy(bundle.curves[i].begin() + static_cast<std::size_t>(k) * d,
                      bundle.curves[i].begin() + static_cast<std::size_t>(k + 1) * d,
                      frame.begin() + static_cast<std::size_t>(i) * d);
        embed_controls(model.control_subspace, u, k, N, v);
        rk4_forward(model, frame, v, N, h, st, next);
        for (int i = 0; i < N; ++i) {
            double defect = 0.0;
            const double* expect = bundle.curves[i].data() + static_cast<std::size_t>(k + 1) * d;
            for (int a = 0; a < d; ++a)
                defect = std::max(defect,
                                  std::abs(next[static_cast<std::size_t>(i) * d + a] - expect[a]));
            rep.worst_defect = std::max(rep.worst_defect, defect);
            if (defect > defect_tol && (rep.pass || rep.reason == "empirical measure mismatch")) {
                if (rep.pass) {
                    rep.fail_node = k + 1;
                    rep.fail_curve = i;
                }
                rep.pass = false;
                if (rep.reason.empty()) rep.reason = "ODE defect above tolerance";
            }
        }
    }
    return rep;
}

namespace {

DiscreteMeasure frame_measure(const Trajectory& traj, int k) { return traj.measure_at(k); }

std::vector<double> lift_controls(const std::vector<double>& x0_prev, int n_prev,
                                  const std::vector<double>& x0_new, int n_new, int dim,
                                  const ControlSignal& u_prev, int steps, int m) {
    const auto plan = w1_general(DiscreteMeasure::uniform(dim, x0_prev),
                                 DiscreteMeasure::uniform(dim, x0_new))
                          .second;
    // Each new agent inherits the control of the previous agent from which it
    // receives the most initial mass.
    std::vector<int> source(n_new, 0);
    std::vector<double> best(n_new, -1.0);
    for (const auto& e : plan.entries)
        if (e.mass > best[e.to]) {
            best[e.to] = e.mass;
            source[e.to] = e.from;
        }
    std::vector<double> lifted(static_cast<std::size_t>(steps) * n_new * m);
    for (int k = 0; k < steps; ++k)
        for (int j = 0; j < n_new; ++j) {
            const auto src = u_prev.at(k, source[j]);
            std::copy(src.begin(), src.end(),
                      lifted.begin() + (static_cast<std::size_t>(k) * n_new + j) * m);
        }
    (void)n_prev;
    return lifted;
}

}  // namespace

GammaSweepResult gamma_sweep(const SweepProblem& problem, const InitialMeasureSpec& mu0,
                             const std::vector<int>& schedule, const SweepConfig& config) {
    if (schedule.empty()) throw std::invalid_argument("gamma_sweep: empty schedule");
    for (std::size_t i = 1; i < schedule.size(); ++i)
        if (schedule[i] <= schedule[i - 1])
            throw std::invalid_argument("gamma_sweep: schedule must be strictly increasing");

    GammaSweepResult result;
    result.schedule = schedule;
    result.ref_points = config.ref_points > 0 ? config.ref_points : (mu0.dim == 1 ? 10000 : 1024);
    result.warm_start_policy =
        config.warm_start ? "sequential, previous optimum lifted by initial-point matching"
                          : "cold start (zero control)";

    const auto ref_points = quantize(mu0, result.ref_points);
    const auto ref_measure = DiscreteMeasure::uniform(mu0.dim, ref_points);
    const auto& phi = problem.penalty.reference;

    const int m = problem.model.control_subspace.dim();
    struct Solved {
        bool ok = false;
        Solution sol;
        std::vector<double> x0;
    };
    std::vector<Solved> solved(schedule.size());
    std::vector<GammaSweepEntry> entries(schedule.size());

    auto run_one = [&](std::size_t idx, const std::vector<double>* warm) {
        auto& entry = entries[idx];
        entry.N = schedule[idx];
        const auto t0 = std::chrono::steady_clock::now();
        try {
            std::vector<double> x0 = quantize(mu0, entry.N);
            OCPSpec spec{problem.model, x0, entry.N, problem.grid, problem.running,
                         problem.penalty};
            SolverConfig sc = config.solver;
            if (warm && !warm->empty()) sc.init_control = *warm;
            Solution sol = solve(spec, sc);
            entry.value = sol.value;
            entry.iterations = sol.iterations;
            entry.converged = sol.converged;
            entry.moment_slack_min = sol.moment_slack_min;
            entry.phi_moment_init = 0.0;
            for (int i = 0; i < entry.N; ++i)
                entry.phi_moment_init += phi.eval(norm(std::span<const double>{
                    x0.data() + static_cast<std::size_t>(i) * mu0.dim,
                    static_cast<std::size_t>(mu0.dim)}));
            entry.phi_moment_init /= entry.N;
            entry.w1_init_to_ref =
                w1_general(DiscreteMeasure::uniform(mu0.dim, x0), ref_measure).first;

            double extent = 1.0;
            for (double s : sol.traj.states) extent = std::max(extent, std::abs(s));
            entry.max_continuity_residual = continuity_residual(
                sol.traj, sol.control, problem.model,
                default_dictionary(problem.model.dim, 1.25 * extent, 0xd1c7ULL));

            solved[idx].ok = true;
            solved[idx].sol = std::move(sol);
            solved[idx].x0 = std::move(x0);
        } catch (const std::exception& e) {
            entry.failed = true;
            entry.error = e.what();
        }
        entry.wallclock_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    if (config.warm_start || config.jobs <= 1) {
        for (std::size_t idx = 0; idx < schedule.size(); ++idx) {
            std::vector<double> warm;
            if (config.warm_start && idx > 0 && solved[idx - 1].ok) {
                const auto& prev = solved[idx - 1];
                warm = lift_controls(prev.x0, schedule[idx - 1], quantize(mu0, schedule[idx]),
                                     schedule[idx], mu0.dim, prev.sol.control,
                                     problem.grid.steps, m);
            }
            run_one(idx, warm.empty() ? nullptr : &warm);
        }
    } else {
        std::size_t next = 0;
        while (next < schedule.size()) {
            std::vector<std::future<void>> batch;
            for (int j = 0; j < config.jobs && next < schedule.size(); ++j, ++next)
                batch.push_back(std::async(std::launch::async, run_one, next, nullptr));
            for (auto& f : batch) f.get();
        }
    }

    // Cross-N distances of the optimal empirical measures at sampled times.
    const int S = std::max(config.sample_times, 2);
    for (std::size_t idx = 1; idx < schedule.size(); ++idx) {
        if (!solved[idx].ok || !solved[idx - 1].ok) continue;
        double sup = 0.0;
        for (int j = 0; j < S; ++j) {
            const int k = static_cast<int>(
                std::lround(static_cast<double>(j) * problem.grid.steps / (S - 1)));
            sup = std::max(sup, w1_general(frame_measure(solved[idx].sol.traj, k),
                                           frame_measure(solved[idx - 1].sol.traj, k))
                                    .first);
        }
        entries[idx].sup_w1_prev = sup;
    }

    for (auto& e : entries) result.any_failed = result.any_failed || e.failed;
    result.entries = std::move(entries);
    return result;
}

}  // namespace mfl
