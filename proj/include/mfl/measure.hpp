#pragma once

#include <span>
#include <vector>

#include "mfl/linalg.hpp"

namespace mfl {

/// Uniform point cloud (1/N) sum of Diracs.
struct EmpiricalMeasure {
    int dim = 0;
    std::vector<double> points;  // N*dim, row-major

    int size() const { return dim == 0 ? 0 : static_cast<int>(points.size()) / dim; }
    std::span<const double> point(int i) const {
        return {points.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
    }
    void validate() const;
};

/// Weighted point cloud; weights sum to one.
struct DiscreteMeasure {
    int dim = 0;
    std::vector<double> points;   // n*dim
    std::vector<double> weights;  // n

    int size() const { return static_cast<int>(weights.size()); }
    std::span<const double> point(int i) const {
        return {points.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
    }
    void validate() const;

    static DiscreteMeasure uniform(int dim, std::vector<double> points);
    static DiscreteMeasure dirac(std::vector<double> point);
};

inline DiscreteMeasure to_measure(const EmpiricalMeasure& e) {
    return DiscreteMeasure::uniform(e.dim, e.points);
}

struct TransportPlan {
    struct Entry {
        int from;
        int to;
        double mass;
    };
    std::vector<Entry> entries;
    double cost = 0.0;
};

}  // namespace mfl
