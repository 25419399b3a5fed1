#include "mfl/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

namespace mfl {

namespace {

constexpr double kInfCost = 1e30;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Shortest augmenting path assignment (Jonker-Volgenant style) on a square
// cost matrix; exact up to floating point.
double assignment(const std::vector<double>& cost, int n, std::vector<int>& row_to_col) {
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = 0;
            double delta = kInf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * static_cast<std::size_t>(n) + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    row_to_col.assign(n, -1);
    double total = 0.0;
    for (int j = 1; j <= n; ++j) {
        if (p[j] == 0) continue;
        row_to_col[p[j] - 1] = j - 1;
        total += cost[(p[j] - 1) * static_cast<std::size_t>(n) + (j - 1)];
    }
    return total;
}

std::vector<int> sorted_order(std::span<const double> values) {
    std::vector<int> idx(values.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return values[a] < values[b]; });
    return idx;
}

// Uncapacitated transportation by successive shortest paths with potentials.
// Nodes: sources 0..n-1, sinks n..n+m-1.
TransportPlan solve_transportation(const std::vector<double>& cost, int n, int m,
                                   std::span<const double> supply, std::span<const double> demand) {
    std::vector<double> rem_a(supply.begin(), supply.end());
    std::vector<double> rem_b(demand.begin(), demand.end());
    std::vector<double> flow(static_cast<std::size_t>(n) * m, 0.0);
    std::vector<double> pot(n + m, 0.0);
    std::vector<std::vector<int>> flow_rows(m);  // sources with positive flow into sink j

    auto c = [&](int i, int j) { return cost[static_cast<std::size_t>(i) * m + j]; };

    const double eps = 1e-14;
    std::vector<double> dist(n + m);
    std::vector<int> parent(n + m);
    std::vector<char> done(n + m);

    while (true) {
        double pending = 0.0;
        for (double a : rem_a) pending += a;
        if (pending <= eps * n + eps) break;

        // Dijkstra from every source with remaining supply.
        std::fill(dist.begin(), dist.end(), kInf);
        std::fill(parent.begin(), parent.end(), -1);
        std::fill(done.begin(), done.end(), 0);
        using Item = std::pair<double, int>;
        std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
        for (int i = 0; i < n; ++i)
            if (rem_a[i] > eps) {
                dist[i] = 0.0;
                heap.push({0.0, i});
            }
        int target = -1;
        double target_dist = kInf;
        while (!heap.empty()) {
            const auto [d, node] = heap.top();
            heap.pop();
            if (done[node] || d > dist[node]) continue;
            done[node] = 1;
            if (d >= target_dist) break;  // no shorter path to a demanding sink remains
            if (node < n) {
                const int i = node;
                for (int j = 0; j < m; ++j) {
                    const double rc = std::max(0.0, c(i, j) + pot[i] - pot[n + j]);
                    if (c(i, j) >= kInfCost) continue;
                    const double nd = d + rc;
                    if (nd < dist[n + j] - 1e-18) {
                        dist[n + j] = nd;
                        parent[n + j] = i;
                        heap.push({nd, n + j});
                        if (rem_b[j] > eps && nd < target_dist) {
                            target_dist = nd;
                            target = j;
                        }
                    }
                }
            } else {
                const int j = node - n;
                auto& rows = flow_rows[j];
                for (std::size_t k = 0; k < rows.size();) {
                    const int i = rows[k];
                    if (flow[static_cast<std::size_t>(i) * m + j] <= 0.0) {
                        rows[k] = rows.back();
                        rows.pop_back();
                        continue;
                    }
                    const double rc = std::max(0.0, pot[n + j] - pot[i] - c(i, j));
                    const double nd = d + rc;
                    if (nd < dist[i] - 1e-18) {
                        dist[i] = nd;
                        parent[i] = n + j;
                        heap.push({nd, i});
                    }
                    ++k;
                }
            }
        }
        if (target < 0) break;  // disconnected (all finite-cost edges exhausted)

        for (int w = 0; w < n + m; ++w) pot[w] += std::min(dist[w], target_dist);

        // Trace the augmenting path and its bottleneck.
        double delta = rem_b[target];
        int node = n + target;
        while (parent[node] >= 0) {
            const int prev = parent[node];
            if (node < n)  // backward edge: flow from sink prev into source node
                delta = std::min(delta, flow[static_cast<std::size_t>(node) * m + (prev - n)]);
            node = prev;
        }
        delta = std::min(delta, rem_a[node]);
        if (delta <= 0.0) break;

        node = n + target;
        while (parent[node] >= 0) {
            const int prev = parent[node];
            if (node >= n) {  // forward edge prev -> node
                const int i = prev, j = node - n;
                auto& x = flow[static_cast<std::size_t>(i) * m + j];
                if (x <= 0.0) flow_rows[j].push_back(i);
                x += delta;
            } else {  // backward edge (node -> prev-n carried the flow)
                flow[static_cast<std::size_t>(node) * m + (prev - n)] -= delta;
            }
            node = prev;
        }
        rem_a[node] -= delta;
        rem_b[target] -= delta;
    }

    TransportPlan plan;
    double total = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            const double x = flow[static_cast<std::size_t>(i) * m + j];
            if (x > 1e-15) {
                plan.entries.push_back({i, j, x});
                total += x * c(i, j);
            }
        }
    plan.cost = total;
    return plan;
}

void check_balanced(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    mu.validate();
    nu.validate();
    if (mu.dim != nu.dim) throw std::invalid_argument("transport: dimension mismatch");
    double sa = 0.0, sb = 0.0;
    for (double w : mu.weights) sa += w;
    for (double w : nu.weights) sb += w;
    if (std::abs(sa - sb) > 1e-9)
        throw std::invalid_argument("transport: unbalanced inputs (weight sums differ)");
}

// Monotone coupling of two weighted 1d measures (optimal for costs convex in
// the displacement).
TransportPlan monotone_coupling_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                   const std::function<double(double)>& ground) {
    const auto ia = sorted_order(mu.points);
    const auto ib = sorted_order(nu.points);
    TransportPlan plan;
    double total = 0.0;
    std::size_t a = 0, b = 0;
    double ra = mu.weights[ia[0]], rb = nu.weights[ib[0]];
    while (a < ia.size() && b < ib.size()) {
        const double mass = std::min(ra, rb);
        if (mass > 0.0) {
            plan.entries.push_back({ia[a], ib[b], mass});
            total += mass * ground(nu.points[ib[b]] - mu.points[ia[a]]);
        }
        ra -= mass;
        rb -= mass;
        if (ra <= 1e-17) {
            if (++a < ia.size()) ra = mu.weights[ia[a]];
        }
        if (rb <= 1e-17) {
            if (++b < ib.size()) rb = nu.weights[ib[b]];
        }
    }
    plan.cost = total;
    return plan;
}

std::pair<double, TransportPlan> solve_with_ground(
    const DiscreteMeasure& mu, const DiscreteMeasure& nu,
    const std::function<double(std::span<const double>)>& ground, bool may_be_infinite) {
    const int n = mu.size(), m = nu.size(), d = mu.dim;
    std::vector<double> cost(static_cast<std::size_t>(n) * m);
    std::vector<double> z(d);
    for (int i = 0; i < n; ++i) {
        const auto x = mu.point(i);
        for (int j = 0; j < m; ++j) {
            const auto y = nu.point(j);
            for (int a = 0; a < d; ++a) z[a] = y[a] - x[a];
            const double g = ground(z);
            cost[static_cast<std::size_t>(i) * m + j] = std::isfinite(g) ? g : kInfCost;
        }
    }
    TransportPlan plan = solve_transportation(cost, n, m, mu.weights, nu.weights);
    if (may_be_infinite) {
        double transported = 0.0;
        for (const auto& e : plan.entries) {
            transported += e.mass;
            if (e.mass > 1e-12 && cost[static_cast<std::size_t>(e.from) * m + e.to] >= kInfCost / 2)
                throw std::runtime_error("transport_cost: no finite-cost feasible plan");
        }
        if (transported < 1.0 - 1e-9)
            throw std::runtime_error("transport_cost: no finite-cost feasible plan");
    }
    return {plan.cost, std::move(plan)};
}

}  // namespace

AssignmentResult w1_assignment(const EmpiricalMeasure& x, const EmpiricalMeasure& y) {
    x.validate();
    y.validate();
    if (x.dim != y.dim) throw std::invalid_argument("w1_assignment: dimension mismatch");
    const int n = x.size();
    if (n != y.size())
        throw std::invalid_argument("w1_assignment: point counts differ; use w1_general");

    AssignmentResult res;
    res.permutation.resize(n);
    if (x.dim == 1) {  // sorted matching is optimal in 1d
        const auto ix = sorted_order(x.points);
        const auto iy = sorted_order(y.points);
        double total = 0.0;
        for (int k = 0; k < n; ++k) {
            res.permutation[ix[k]] = iy[k];
            total += std::abs(x.points[ix[k]] - y.points[iy[k]]);
        }
        res.distance = total / n;
        return res;
    }
    std::vector<double> cost(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            cost[static_cast<std::size_t>(i) * n + j] = dist(x.point(i), y.point(j));
    res.distance = assignment(cost, n, res.permutation) / n;
    return res;
}

std::pair<double, TransportPlan> w1_general(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    check_balanced(mu, nu);
    if (mu.dim == 1) {
        TransportPlan plan = monotone_coupling_1d(mu, nu, [](double z) { return std::abs(z); });
        return {plan.cost, std::move(plan)};
    }
    return solve_with_ground(
        mu, nu, [](std::span<const double> z) { return norm(z); }, false);
}

std::pair<double, TransportPlan> transport_cost(
    const std::function<double(std::span<const double>)>& psi, const DiscreteMeasure& mu,
    const DiscreteMeasure& nu) {
    check_balanced(mu, nu);
    return solve_with_ground(mu, nu, psi, true);
}

std::pair<double, TransportPlan> transport_cost(const ModeratedPenalty& psi,
                                                const DiscreteMeasure& mu,
                                                const DiscreteMeasure& nu) {
    check_balanced(mu, nu);
    if (psi.subspace.ambient_dim != mu.dim)
        throw std::invalid_argument("transport_cost: penalty subspace dimension mismatch");
    const Subspace& U = psi.subspace;
    std::vector<double> coords(U.dim());
    auto ground = [&](std::span<const double> z) {
        if (!U.is_full() && U.offspace_norm(z) > 1e-9 * (1.0 + norm(z)))
            return std::numeric_limits<double>::infinity();
        U.project(z, coords);
        return psi.eval(coords);
    };
    return solve_with_ground(mu, nu, ground, true);
}

double moment(const DiscreteMeasure& mu, const std::function<double(double)>& theta) {
    mu.validate();
    double s = 0.0;
    for (int j = 0; j < mu.size(); ++j) s += mu.weights[j] * theta(norm(mu.point(j)));
    return s;
}

}  // namespace mfl
