#include "mfl/cost.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

namespace mfl {

RunningCost make_zero_cost() {
    RunningCost c;
    c.name = "zero";
    c.is_zero = true;
    c.eval = [](std::span<const double>, const DiscreteMeasure&) { return 0.0; };
    c.mean_gradient = [](std::span<const double>, int, std::span<double> g) {
        std::fill(g.begin(), g.end(), 0.0);
    };
    return c;
}

RunningCost make_variance_cost(InteractionModel::Structure order) {
    RunningCost c;
    const bool second = order == InteractionModel::Structure::second_order;
    c.name = second ? "velocity_variance" : "variance";
    c.eval = [second](std::span<const double> x, const DiscreteMeasure& cohort) {
        const int d = cohort.dim;
        const int lo = second ? d / 2 : 0;
        double v = 0.0;
        for (int a = lo; a < d; ++a) {
            double mean = 0.0;
            for (int j = 0; j < cohort.size(); ++j) mean += cohort.weights[j] * cohort.point(j)[a];
            const double r = x[a] - mean;
            v += r * r;
        }
        return v;
    };
    c.mean_gradient = [second](std::span<const double> states, int agents, std::span<double> g) {
        const int d = static_cast<int>(states.size()) / agents;
        const int lo = second ? d / 2 : 0;
        std::fill(g.begin(), g.end(), 0.0);
        for (int a = lo; a < d; ++a) {
            double mean = 0.0;
            for (int i = 0; i < agents; ++i) mean += states[static_cast<std::size_t>(i) * d + a];
            mean /= agents;
            // sum_i |x_i - m|^2 has gradient 2(x_j - m): the mean-coupling
            // terms cancel because the residuals sum to zero.
            for (int i = 0; i < agents; ++i) {
                const std::size_t idx = static_cast<std::size_t>(i) * d + a;
                g[idx] = 2.0 / agents * (states[idx] - mean);
            }
        }
    };
    return c;
}

RunningCost make_tracking_cost(std::vector<double> target) {
    RunningCost c;
    c.name = "tracking";
    auto a = std::make_shared<std::vector<double>>(std::move(target));
    c.eval = [a](std::span<const double> x, const DiscreteMeasure&) {
        double v = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = x[i] - (*a)[i];
            v += r * r;
        }
        return v;
    };
    c.mean_gradient = [a](std::span<const double> states, int agents, std::span<double> g) {
        const int d = static_cast<int>(states.size()) / agents;
        for (int i = 0; i < agents; ++i)
            for (int b = 0; b < d; ++b) {
                const std::size_t idx = static_cast<std::size_t>(i) * d + b;
                g[idx] = 2.0 / agents * (states[idx] - (*a)[b]);
            }
    };
    return c;
}

double mean_running_cost(const RunningCost& cost, std::span<const double> states, int agents,
                         int dim) {
    if (cost.is_zero) return 0.0;
    const auto mu = DiscreteMeasure::uniform(dim, std::vector<double>(states.begin(), states.end()));
    double s = 0.0;
    for (int i = 0; i < agents; ++i)
        s += cost.eval(std::span<const double>{states.data() + static_cast<std::size_t>(i) * dim,
                                               static_cast<std::size_t>(dim)},
                       mu);
    return s / agents;
}

void mean_running_cost_gradient(const RunningCost& cost, std::span<const double> states,
                                int agents, int dim, std::span<double> grad) {
    if (cost.mean_gradient) {
        cost.mean_gradient(states, agents, grad);
        return;
    }
    // Central differences on L only, never on the rollout.
    std::vector<double> x(states.begin(), states.end());
    for (std::size_t c = 0; c < x.size(); ++c) {
        const double saved = x[c];
        const double h = 1e-6 * (1.0 + std::abs(saved));
        x[c] = saved + h;
        const double fp = mean_running_cost(cost, x, agents, dim);
        x[c] = saved - h;
        const double fm = mean_running_cost(cost, x, agents, dim);
        x[c] = saved;
        grad[c] = (fp - fm) / (2.0 * h);
    }
}

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

double measure_penalty(std::span<const double> positions, int agents, int dim,
                       std::span<const double> controls, int control_dim,
                       const ModeratedPenalty& psi, double coincidence_tol) {
    if (control_dim != psi.dim())
        throw std::invalid_argument("measure_penalty: control dimension does not match psi");
    auto pos = [&](int i) {
        return std::span<const double>{positions.data() + static_cast<std::size_t>(i) * dim,
                                       static_cast<std::size_t>(dim)};
    };
    if (coincidence_tol < 0.0) {
        double diam = 0.0;
        for (int i = 0; i < agents; ++i)
            for (int j = i + 1; j < agents; ++j) diam = std::max(diam, dist(pos(i), pos(j)));
        coincidence_tol = 1e-9 * (1.0 + diam);
    }
    UnionFind uf(agents);
    for (int i = 0; i < agents; ++i)
        for (int j = i + 1; j < agents; ++j)
            if (dist(pos(i), pos(j)) <= coincidence_tol) uf.unite(i, j);

    std::vector<std::vector<double>> group_sum;
    std::vector<int> group_count, group_of(agents, -1);
    for (int i = 0; i < agents; ++i) {
        const int root = uf.find(i);
        if (group_of[root] < 0) {
            group_of[root] = static_cast<int>(group_sum.size());
            group_sum.emplace_back(control_dim, 0.0);
            group_count.push_back(0);
        }
        auto& s = group_sum[group_of[root]];
        const double* u = controls.data() + static_cast<std::size_t>(i) * control_dim;
        for (int c = 0; c < control_dim; ++c) s[c] += u[c];
        ++group_count[group_of[root]];
    }
    double total = 0.0;
    std::vector<double> mean(control_dim);
    for (std::size_t g = 0; g < group_sum.size(); ++g) {
        for (int c = 0; c < control_dim; ++c) mean[c] = group_sum[g][c] / group_count[g];
        total += static_cast<double>(group_count[g]) / agents * psi.eval(mean);
    }
    return total;
}

double jensen_gap(std::span<const double> positions, int agents, int dim,
                  std::span<const double> controls, int control_dim, const ModeratedPenalty& psi,
                  double coincidence_tol) {
    double per_agent = 0.0;
    for (int i = 0; i < agents; ++i)
        per_agent += psi.eval(std::span<const double>{
            controls.data() + static_cast<std::size_t>(i) * control_dim,
            static_cast<std::size_t>(control_dim)});
    per_agent /= agents;
    return per_agent -
           measure_penalty(positions, agents, dim, controls, control_dim, psi, coincidence_tol);
}

CostReport finite_cost(const Trajectory& traj, const ControlSignal& u, const RunningCost& cost,
                       const ModeratedPenalty& psi) {
    const int M = traj.grid.steps, N = traj.agents, d = traj.dim;
    if (u.steps != M || u.agents != N)
        throw std::invalid_argument("finite_cost: control/trajectory grid mismatch");
    if (u.control_dim != psi.dim())
        throw std::invalid_argument("finite_cost: control values outside the penalty's subspace");

    CostReport rep;
    // Trapezoidal quadrature of the normalized running integral; the penalty
    // integrand is piecewise constant, so its rectangle sum is exact.
    if (!cost.is_zero) {
        double running = 0.0;
        for (int k = 0; k <= M; ++k) {
            const double w = (k == 0 || k == M) ? 0.5 : 1.0;
            running += w * mean_running_cost(cost, traj.frame(k), N, d);
        }
        rep.running_term = running / M;
    }
    double penalty = 0.0, grouped = 0.0;
    for (int k = 0; k < M; ++k) {
        double frame = 0.0;
        for (int i = 0; i < N; ++i) frame += psi.eval(u.at(k, i));
        penalty += frame / N;
        const std::span<const double> uk{
            u.values.data() + static_cast<std::size_t>(k) * N * u.control_dim,
            static_cast<std::size_t>(N) * u.control_dim};
        grouped += measure_penalty(traj.frame(k), N, d, uk, u.control_dim, psi);
    }
    rep.penalty_term = penalty / M;
    rep.measure_penalty = grouped / M;
    rep.per_agent_penalty_mean = rep.penalty_term;
    rep.jensen_gap = rep.per_agent_penalty_mean - rep.measure_penalty;
    rep.total = rep.running_term + rep.penalty_term;
    return rep;
}

}  // namespace mfl
