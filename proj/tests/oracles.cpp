#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace oracle {

double brute_force_assignment(const mfl::EmpiricalMeasure& x, const mfl::EmpiricalMeasure& y) {
    const int n = x.size();
    if (n > 9) throw std::invalid_argument("brute_force_assignment: too many points");
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (int i = 0; i < n; ++i) total += mfl::dist(x.point(i), y.point(perm[i]));
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / n;
}

namespace {

constexpr double kEps = 1e-11;

struct Tableau {
    int m, n;                            // constraints, variables (incl. artificials)
    std::vector<std::vector<double>> a;  // m x n
    std::vector<double> b;               // m
    std::vector<int> basis;              // m

    void pivot(int row, int col) {
        const double p = a[row][col];
        for (int j = 0; j < n; ++j) a[row][j] /= p;
        b[row] /= p;
        for (int r = 0; r < m; ++r) {
            if (r == row) continue;
            const double f = a[r][col];
            if (f == 0.0) continue;
            for (int j = 0; j < n; ++j) a[r][j] -= f * a[row][j];
            b[r] -= f * b[row];
        }
        basis[row] = col;
    }

    // Minimizes c.x from the current basic feasible point; Bland's rule.
    double optimize(const std::vector<double>& c) {
        while (true) {
            std::vector<double> y(m);  // multipliers via the basis costs
            std::vector<double> reduced(n);
            for (int j = 0; j < n; ++j) reduced[j] = c[j];
            for (int r = 0; r < m; ++r) {
                const double cb = c[basis[r]];
                if (cb == 0.0) continue;
                for (int j = 0; j < n; ++j) reduced[j] -= cb * a[r][j];
            }
            int col = -1;
            for (int j = 0; j < n; ++j)
                if (reduced[j] < -kEps) {
                    col = j;
                    break;
                }
            if (col < 0) break;
            int row = -1;
            double best_ratio = std::numeric_limits<double>::infinity();
            for (int r = 0; r < m; ++r) {
                if (a[r][col] > kEps) {
                    const double ratio = b[r] / a[r][col];
                    if (ratio < best_ratio - kEps ||
                        (ratio < best_ratio + kEps && (row < 0 || basis[r] < basis[row]))) {
                        best_ratio = ratio;
                        row = r;
                    }
                }
            }
            if (row < 0) throw std::runtime_error("simplex: unbounded");
            pivot(row, col);
        }
        double value = 0.0;
        for (int r = 0; r < m; ++r) value += c[basis[r]] * b[r];
        return value;
    }
};

}  // namespace

double simplex_solve(std::vector<std::vector<double>> A, std::vector<double> b,
                     std::vector<double> c) {
    const int m = static_cast<int>(A.size());
    const int n = static_cast<int>(c.size());
    for (int r = 0; r < m; ++r)
        if (b[r] < 0.0) {
            for (auto& v : A[r]) v = -v;
            b[r] = -b[r];
        }

    Tableau t;
    t.m = m;
    t.n = n + m;  // artificials appended
    t.a.assign(m, std::vector<double>(t.n, 0.0));
    t.b = b;
    t.basis.resize(m);
    for (int r = 0; r < m; ++r) {
        for (int j = 0; j < n; ++j) t.a[r][j] = A[r][j];
        t.a[r][n + r] = 1.0;
        t.basis[r] = n + r;
    }

    std::vector<double> phase1(t.n, 0.0);
    for (int j = n; j < t.n; ++j) phase1[j] = 1.0;
    const double infeas = t.optimize(phase1);
    if (infeas > 1e-7) throw std::runtime_error("simplex: infeasible");

    // Drive artificials out of the basis; rows that cannot pivot are redundant.
    for (int r = 0; r < m; ++r) {
        if (t.basis[r] < n) continue;
        int col = -1;
        for (int j = 0; j < n; ++j)
            if (std::abs(t.a[r][j]) > 1e-9) {
                col = j;
                break;
            }
        if (col >= 0) t.pivot(r, col);
    }

    std::vector<double> c2(t.n, 0.0);
    for (int j = 0; j < n; ++j) c2[j] = c[j];
    for (int j = n; j < t.n; ++j) c2[j] = 1e6;  // keep any stuck artificial at zero
    return t.optimize(c2);
}

double lp_transport_value(const mfl::DiscreteMeasure& mu, const mfl::DiscreteMeasure& nu,
                          const std::function<double(std::span<const double>,
                                                     std::span<const double>)>& ground) {
    const int n = mu.size(), m = nu.size();
    const int vars = n * m;
    std::vector<std::vector<double>> A;
    std::vector<double> b;
    for (int i = 0; i < n; ++i) {
        std::vector<double> row(vars, 0.0);
        for (int j = 0; j < m; ++j) row[i * m + j] = 1.0;
        A.push_back(std::move(row));
        b.push_back(mu.weights[i]);
    }
    for (int j = 0; j < m; ++j) {
        std::vector<double> row(vars, 0.0);
        for (int i = 0; i < n; ++i) row[i * m + j] = 1.0;
        A.push_back(std::move(row));
        b.push_back(nu.weights[j]);
    }
    std::vector<double> c(vars);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) c[i * m + j] = ground(mu.point(i), nu.point(j));
    return simplex_solve(std::move(A), std::move(b), std::move(c));
}

double vertex_enumeration_transport(const mfl::DiscreteMeasure& mu, const mfl::DiscreteMeasure& nu,
                                    const std::function<double(std::span<const double>,
                                                               std::span<const double>)>& ground) {
    const int n = mu.size(), m = nu.size();
    const int edges = n * m;
    const int nodes = n + m;
    const int tree_edges = nodes - 1;
    if (edges > 16) throw std::invalid_argument("vertex_enumeration_transport: instance too large");

    std::vector<double> cost(edges);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) cost[i * m + j] = ground(mu.point(i), nu.point(j));

    double best = std::numeric_limits<double>::infinity();
    std::vector<int> pick(tree_edges);
    std::function<void(int, int)> rec = [&](int start, int depth) {
        if (depth == tree_edges) {
            // Union-find acyclicity test.
            std::vector<int> parent(nodes);
            std::iota(parent.begin(), parent.end(), 0);
            std::function<int(int)> find = [&](int a) {
                while (parent[a] != a) a = parent[a] = parent[parent[a]];
                return a;
            };
            for (int e : pick) {
                const int u = e / m, v = n + e % m;
                const int ru = find(u), rv = find(v);
                if (ru == rv) return;  // cycle
                parent[ru] = rv;
            }
            // Leaf elimination solves the tree system.
            std::vector<double> residual(nodes);
            for (int i = 0; i < n; ++i) residual[i] = mu.weights[i];
            for (int j = 0; j < m; ++j) residual[n + j] = nu.weights[j];
            std::vector<std::vector<int>> incident(nodes);
            for (int idx = 0; idx < tree_edges; ++idx) {
                incident[pick[idx] / m].push_back(idx);
                incident[n + pick[idx] % m].push_back(idx);
            }
            std::vector<double> flow(tree_edges, 0.0);
            std::vector<char> edge_done(tree_edges, 0), node_done(nodes, 0);
            for (int round = 0; round < nodes; ++round) {
                for (int v = 0; v < nodes; ++v) {
                    if (node_done[v]) continue;
                    int open = -1, count = 0;
                    for (int idx : incident[v])
                        if (!edge_done[idx]) {
                            open = idx;
                            ++count;
                        }
                    if (count != 1) continue;
                    flow[open] = residual[v];
                    const int e = pick[open];
                    const int other = (v < n) ? n + e % m : e / m;
                    residual[other] -= residual[v];
                    residual[v] = 0.0;
                    edge_done[open] = 1;
                    node_done[v] = 1;
                }
            }
            double total = 0.0;
            for (int idx = 0; idx < tree_edges; ++idx) {
                if (flow[idx] < -1e-10) return;  // infeasible vertex
                total += std::max(flow[idx], 0.0) * cost[pick[idx]];
            }
            best = std::min(best, total);
            return;
        }
        for (int e = start; e <= edges - (tree_edges - depth); ++e) {
            pick[depth] = e;
            rec(e + 1, depth + 1);
        }
    };
    rec(0, 0);
    return best;
}

double riccati_value(double x0, double a, double T, int steps) {
    // Q(s) = P(T - s) turns the terminal condition into Q(0) = 0 with
    // Q' = 1 - 2 Q^2.
    auto f = [](double q) { return 1.0 - 2.0 * q * q; };
    double q = 0.0;
    const double h = T / steps;
    for (int k = 0; k < steps; ++k) {
        const double k1 = f(q);
        const double k2 = f(q + 0.5 * h * k1);
        const double k3 = f(q + 0.5 * h * k2);
        const double k4 = f(q + h * k3);
        q += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return q * (x0 - a) * (x0 - a) / T;
}

}  // namespace oracle
