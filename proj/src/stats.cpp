#include "vcg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vcg {

double mean(const std::vector<double>& xs) {
    if (xs.empty()) throw std::invalid_argument("mean of an empty sample");
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

double population_variance(const std::vector<double>& xs) {
    double m = mean(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - m) * (x - m);
    return acc / static_cast<double>(xs.size());
}

double skewness(const std::vector<double>& xs) {
    if (xs.size() < 3) throw std::invalid_argument("skewness requires at least 3 samples");
    double m = mean(xs);
    double m2 = 0.0, m3 = 0.0;
    for (double x : xs) {
        double dx = x - m;
        m2 += dx * dx;
        m3 += dx * dx * dx;
    }
    double n = static_cast<double>(xs.size());
    m2 /= n;
    m3 /= n;
    if (m2 == 0.0) throw std::invalid_argument("skewness of a constant sample");
    return m3 / std::pow(m2, 1.5);
}

double top_share(std::vector<double> xs, double fraction) {
    if (xs.empty()) throw std::invalid_argument("top_share of an empty sample");
    if (fraction <= 0.0 || fraction > 1.0)
        throw std::invalid_argument("fraction must be in (0, 1]");
    std::sort(xs.begin(), xs.end(), std::greater<>());
    size_t take = static_cast<size_t>(
        std::ceil(fraction * static_cast<double>(xs.size())));
    if (take == 0) take = 1;
    double total = 0.0, top = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        total += xs[i];
        if (i < take) top += xs[i];
    }
    return total <= 0.0 ? 0.0 : top / total;
}

}  // namespace vcg
