#include "mfl/measure.hpp"

#include <cmath>
#include <stdexcept>

namespace mfl {

void EmpiricalMeasure::validate() const {
    if (dim <= 0 || points.empty() || points.size() % dim != 0)
        throw std::invalid_argument("EmpiricalMeasure: need N >= 1 points of equal dimension");
    if (!all_finite(points)) throw std::invalid_argument("EmpiricalMeasure: non-finite coordinate");
}

void DiscreteMeasure::validate() const {
    if (dim <= 0 || weights.empty() || points.size() != weights.size() * dim)
        throw std::invalid_argument("DiscreteMeasure: inconsistent points/weights");
    if (!all_finite(points) || !all_finite(weights))
        throw std::invalid_argument("DiscreteMeasure: non-finite entry");
    double sum = 0.0, comp = 0.0;  // Kahan, so the 1e-12 tolerance is meaningful at n ~ 1e4
    for (double w : weights) {
        if (w < 0.0) throw std::invalid_argument("DiscreteMeasure: negative weight");
        const double y = w - comp, t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("DiscreteMeasure: weights must sum to 1");
}

DiscreteMeasure DiscreteMeasure::uniform(int dim, std::vector<double> points) {
    DiscreteMeasure mu;
    mu.dim = dim;
    mu.points = std::move(points);
    const int n = dim > 0 ? static_cast<int>(mu.points.size()) / dim : 0;
    mu.weights.assign(n, n > 0 ? 1.0 / n : 0.0);
    mu.validate();
    return mu;
}

DiscreteMeasure DiscreteMeasure::dirac(std::vector<double> point) {
    DiscreteMeasure mu;
    mu.dim = static_cast<int>(point.size());
    mu.points = std::move(point);
    mu.weights = {1.0};
    mu.validate();
    return mu;
}

}  // namespace mfl
