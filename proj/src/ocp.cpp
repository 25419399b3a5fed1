#include "mfl/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>

namespace mfl {

void OCPSpec::validate() const {
    const int d = model.dim;
    if (agents < 1 || static_cast<int>(x0.size()) != agents * d)
        throw std::invalid_argument("OCPSpec: x0 shape mismatch");
    if (grid.steps < 1 || grid.horizon <= 0.0) throw std::invalid_argument("OCPSpec: bad grid");
    const Subspace& a = penalty.subspace;
    const Subspace& b = model.control_subspace;
    if (a.ambient_dim != b.ambient_dim || a.basis_dim != b.basis_dim)
        throw std::invalid_argument("OCPSpec: penalty subspace differs from the control subspace");
    for (std::size_t i = 0; i < a.basis.size(); ++i)
        if (std::abs(a.basis[i] - b.basis[i]) > 1e-12)
            throw std::invalid_argument("OCPSpec: penalty subspace differs from the control subspace");
}

namespace {

ControlSignal wrap_controls(const OCPSpec& spec, std::span<const double> flat) {
    ControlSignal u;
    u.steps = spec.grid.steps;
    u.agents = spec.agents;
    u.control_dim = spec.model.control_subspace.dim();
    u.values.assign(flat.begin(), flat.end());
    return u;
}

struct Rollout {
    Trajectory traj;
    CostReport report;
};

Rollout rollout_cost(const OCPSpec& spec, const ControlSignal& u) {
    Rollout r;
    r.traj = integrate(spec.model, spec.x0, spec.agents, u, spec.grid);
    r.report = finite_cost(r.traj, u, spec.running, spec.penalty);
    return r;
}

// Reverse sweep through the Runge-Kutta stages; stages are recomputed from
// the stored node states so the forward pass stays memory-light.
std::vector<double> adjoint_gradient(const OCPSpec& spec, const ControlSignal& u,
                                     const Trajectory& traj) {
    const int M = spec.grid.steps, N = spec.agents, d = spec.model.dim;
    const int m = spec.model.control_subspace.dim();
    const double h = spec.grid.dt();
    const std::size_t nd = static_cast<std::size_t>(N) * d;
    const InteractionModel& model = spec.model;

    std::vector<double> grad(static_cast<std::size_t>(M) * N * m, 0.0);
    std::vector<double> lambda(nd, 0.0), lcost(nd, 0.0);
    std::vector<double> v(nd), gV(nd), gx(nd), gk1(nd), gk2(nd), gk3(nd), gk4(nd), next(nd);
    RK4Stages st;

    auto running_weight = [&](int k) { return (k == 0 || k == M) ? 0.5 / M : 1.0 / M; };
    auto add_running_gradient = [&](int k, std::vector<double>& acc) {
        if (spec.running.is_zero) return;
        mean_running_cost_gradient(spec.running, traj.frame(k), N, d, lcost);
        const double w = running_weight(k);
        for (std::size_t a = 0; a < nd; ++a) acc[a] += w * lcost[a];
    };

    add_running_gradient(M, lambda);

    std::vector<double> psi_grad(m);
    for (int k = M - 1; k >= 0; --k) {
        embed_controls(model.control_subspace, u, k, N, v);
        rk4_forward(model, traj.frame(k), v, N, h, st, next);

        // Seed the stage adjoints from x_{k+1} = x_k + h/6 (k1+2k2+2k3+k4).
        for (std::size_t a = 0; a < nd; ++a) {
            gk1[a] = h / 6.0 * lambda[a];
            gk2[a] = h / 3.0 * lambda[a];
            gk3[a] = h / 3.0 * lambda[a];
            gk4[a] = h / 6.0 * lambda[a];
        }
        std::fill(gV.begin(), gV.end(), 0.0);
        auto pull_stage = [&](std::span<const double> stage_state, std::vector<double>& gk,
                              double carry_weight, std::vector<double>* carry_gk) {
            cohort_field_vjp(model, stage_state, N, gk, gx);
            for (std::size_t a = 0; a < nd; ++a) {
                gV[a] += gk[a];
                lambda[a] += gx[a];
                if (carry_gk) (*carry_gk)[a] += carry_weight * gx[a];
            }
        };
        // k4 at x4 = x_k + h k3, k3 at x3 = x_k + h/2 k2, k2 at x2 = x_k + h/2 k1.
        pull_stage(st.x4, gk4, h, &gk3);
        pull_stage(st.x3, gk3, 0.5 * h, &gk2);
        pull_stage(st.x2, gk2, 0.5 * h, &gk1);
        pull_stage(traj.frame(k), gk1, 0.0, nullptr);

        add_running_gradient(k, lambda);

        // Control gradient: stage adjoints pulled back through the embedding,
        // plus the penalty quadrature weight 1/(M N).
        std::vector<double> coords(m);
        for (int i = 0; i < N; ++i) {
            const std::span<const double> gvi{gV.data() + static_cast<std::size_t>(i) * d,
                                              static_cast<std::size_t>(d)};
            double* gu = grad.data() + (static_cast<std::size_t>(k) * N + i) * m;
            model.control_subspace.project(gvi, coords);
            spec.penalty.grad(u.at(k, i), psi_grad);
            for (int c = 0; c < m; ++c)
                gu[c] = coords[c] + psi_grad[c] / (static_cast<double>(M) * N);
        }
    }
    return grad;
}

}  // namespace

std::pair<double, std::vector<double>> cost_and_gradient(const OCPSpec& spec,
                                                         const ControlSignal& u) {
    spec.validate();
    const Rollout r = rollout_cost(spec, u);
    return {r.report.total, adjoint_gradient(spec, u, r.traj)};
}

Solution solve(const OCPSpec& spec, const SolverConfig& config) {
    spec.validate();
    const int M = spec.grid.steps, N = spec.agents;
    const int m = spec.model.control_subspace.dim();
    const std::size_t dim = static_cast<std::size_t>(M) * N * m;

    std::vector<double> z(dim, 0.0);
    if (!config.init_control.empty()) {
        if (config.init_control.size() != dim)
            throw std::invalid_argument("solve: init_control shape mismatch");
        z = config.init_control;
    }

    ControlSignal u = wrap_controls(spec, z);
    Rollout cur = rollout_cost(spec, u);
    double f = cur.report.total;
    std::vector<double> g = adjoint_gradient(spec, u, cur.traj);

    Solution sol;
    sol.moment_slack_min = std::numeric_limits<double>::infinity();
    auto record_moment = [&](const Trajectory& traj, const ControlSignal& uu) {
        const auto rep = check_moment_bound(traj, uu, spec.model.growth_A, spec.model.growth_B);
        sol.moment_slack_min = std::min(sol.moment_slack_min, rep.slack);
    };
    record_moment(cur.traj, u);
    sol.history.emplace_back(f, sup_norm(g));

    std::deque<std::vector<double>> s_hist, y_hist;
    std::deque<double> rho_hist;
    std::vector<double> dir(dim), q(dim), z_new(dim);

    int iter = 0;
    sol.status = SolveStatus::max_iters;
    for (; iter < config.max_iters; ++iter) {
        const double gnorm = sup_norm(g);
        if (gnorm <= config.grad_tol * (1.0 + std::abs(f))) {
            sol.status = SolveStatus::converged;
            break;
        }

        // Two-loop recursion.
        q = g;
        std::vector<double> alpha(s_hist.size());
        for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
            alpha[i] = rho_hist[i] * dot(s_hist[i], q);
            for (std::size_t a = 0; a < dim; ++a) q[a] -= alpha[i] * y_hist[i][a];
        }
        if (!s_hist.empty()) {
            const double scale =
                dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
            for (auto& val : q) val *= scale;
        }
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            const double beta = rho_hist[i] * dot(y_hist[i], q);
            for (std::size_t a = 0; a < dim; ++a) q[a] += (alpha[i] - beta) * s_hist[i][a];
        }
        for (std::size_t a = 0; a < dim; ++a) dir[a] = -q[a];

        double slope = dot(g, dir);
        if (slope >= 0.0) {  // not a descent direction: restart from steepest descent
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            for (std::size_t a = 0; a < dim; ++a) dir[a] = -g[a];
            slope = dot(g, dir);
        }

        double step = 1.0;
        bool accepted = false;
        Rollout trial;
        ControlSignal u_new;
        double f_new = f;
        for (int bt = 0; bt < config.max_backtracks; ++bt) {
            for (std::size_t a = 0; a < dim; ++a) z_new[a] = z[a] + step * dir[a];
            u_new = wrap_controls(spec, z_new);
            trial = rollout_cost(spec, u_new);
            f_new = trial.report.total;
            if (f_new <= f + config.armijo_c * step * slope) {
                accepted = true;
                break;
            }
            step *= config.backtrack;
        }
        if (!accepted) {
            sol.status = SolveStatus::stalled;
            break;
        }

        std::vector<double> g_new = adjoint_gradient(spec, u_new, trial.traj);
        record_moment(trial.traj, u_new);

        std::vector<double> s(dim), y(dim);
        for (std::size_t a = 0; a < dim; ++a) {
            s[a] = z_new[a] - z[a];
            y[a] = g_new[a] - g[a];
        }
        const double sy = dot(s, y);
        if (sy > 1e-10 * norm(s) * norm(y)) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > config.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }

        z.swap(z_new);
        u = wrap_controls(spec, z);
        cur = std::move(trial);
        f = f_new;
        g = std::move(g_new);
        sol.history.emplace_back(f, sup_norm(g));
    }

    sol.control = u;
    sol.traj = std::move(cur.traj);
    sol.cost = cur.report;
    sol.value = f;
    sol.grad_norm = sup_norm(g);
    sol.iterations = iter;
    sol.converged = sol.status == SolveStatus::converged;
    return sol;
}

double fd_gradient_check(const OCPSpec& spec, const ControlSignal& u, double step, int n_probes,
                         std::uint64_t seed) {
    if (step <= 0.0) throw std::invalid_argument("fd_gradient_check: need step > 0");
    spec.validate();
    const Rollout base = rollout_cost(spec, u);
    const std::vector<double> g = adjoint_gradient(spec, u, base.traj);
    const double gmax = sup_norm(g);

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, u.values.size() - 1);
    double worst = 0.0;
    ControlSignal probe = u;
    for (int p = 0; p < n_probes; ++p) {
        const std::size_t c = pick(rng);
        const double saved = probe.values[c];
        const double h = step * (1.0 + std::abs(saved));
        probe.values[c] = saved + h;
        const double fp = rollout_cost(spec, probe).report.total;
        probe.values[c] = saved - h;
        const double fm = rollout_cost(spec, probe).report.total;
        probe.values[c] = saved;
        const double fd = (fp - fm) / (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(g[c]), 1e-4 * (1.0 + gmax)});
        worst = std::max(worst, std::abs(g[c] - fd) / denom);
    }
    return worst;
}

}  // namespace mfl
