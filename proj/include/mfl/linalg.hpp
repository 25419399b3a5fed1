#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfl {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

inline double sup_norm(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

inline bool all_finite(std::span<const double> a) {
    for (double v : a)
        if (!std::isfinite(v)) return false;
    return true;
}

/// Linear subspace of R^d given by an orthonormal basis, stored column-major
/// (basis[a + ambient_dim*c] is component a of basis vector c).
struct Subspace {
    int ambient_dim = 0;
    int basis_dim = 0;
    std::vector<double> basis;

    int dim() const { return basis_dim; }
    bool is_full() const { return basis_dim == ambient_dim; }

    /// out = B * coords (coords in the U-basis, out in R^d).
    void embed(std::span<const double> coords, std::span<double> out) const {
        for (int a = 0; a < ambient_dim; ++a) out[a] = 0.0;
        for (int c = 0; c < basis_dim; ++c) {
            const double w = coords[c];
            for (int a = 0; a < ambient_dim; ++a) out[a] += basis[a + ambient_dim * c] * w;
        }
    }

    /// coords = B^T * v.
    void project(std::span<const double> v, std::span<double> coords) const {
        for (int c = 0; c < basis_dim; ++c) {
            double s = 0.0;
            for (int a = 0; a < ambient_dim; ++a) s += basis[a + ambient_dim * c] * v[a];
            coords[c] = s;
        }
    }

    /// |v - B B^T v|, the distance of v from U.
    double offspace_norm(std::span<const double> v) const {
        std::vector<double> c(basis_dim), r(v.begin(), v.end());
        project(v, c);
        for (int j = 0; j < basis_dim; ++j)
            for (int a = 0; a < ambient_dim; ++a) r[a] -= basis[a + ambient_dim * j] * c[j];
        return norm(r);
    }

    static Subspace full(int d) {
        Subspace u;
        u.ambient_dim = d;
        u.basis_dim = d;
        u.basis.assign(static_cast<std::size_t>(d) * d, 0.0);
        for (int i = 0; i < d; ++i) u.basis[i + d * i] = 1.0;
        return u;
    }

    /// {0} x R^m inside R^{2m}: controls act on the velocity block.
    static Subspace velocity_half(int m) {
        Subspace u;
        u.ambient_dim = 2 * m;
        u.basis_dim = m;
        u.basis.assign(static_cast<std::size_t>(2 * m) * m, 0.0);
        for (int c = 0; c < m; ++c) u.basis[(m + c) + 2 * m * c] = 1.0;
        return u;
    }

    /// Orthonormalizes the given spanning vectors (modified Gram-Schmidt).
    static Subspace from_vectors(int d, const std::vector<std::vector<double>>& vecs) {
        Subspace u;
        u.ambient_dim = d;
        std::vector<std::vector<double>> q;
        for (const auto& v : vecs) {
            if (static_cast<int>(v.size()) != d)
                throw std::invalid_argument("Subspace::from_vectors: vector dimension mismatch");
            std::vector<double> w = v;
            for (const auto& e : q) {
                const double c = dot(w, e);
                for (int a = 0; a < d; ++a) w[a] -= c * e[a];
            }
            const double n = norm(w);
            if (n < 1e-12) throw std::invalid_argument("Subspace::from_vectors: rank-deficient basis");
            for (int a = 0; a < d; ++a) w[a] /= n;
            q.push_back(std::move(w));
        }
        u.basis_dim = static_cast<int>(q.size());
        u.basis.resize(static_cast<std::size_t>(d) * u.basis_dim);
        for (int c = 0; c < u.basis_dim; ++c)
            for (int a = 0; a < d; ++a) u.basis[a + d * c] = q[c][a];
        return u;
    }
};

}  // namespace mfl
