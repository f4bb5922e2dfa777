#pragma once

#include <vector>

namespace vcg {

// Errors on an empty sample.
double mean(const std::vector<double>& xs);

// Population (biased) variance, m2.
double population_variance(const std::vector<double>& xs);

// Fisher-Pearson moment coefficient g1 = m3 / m2^(3/2) with population
// moments. Requires n >= 3 and nonzero variance.
double skewness(const std::vector<double>& xs);

// Share of the total mass held by the ceil(n * fraction) largest entries.
// Zero total mass yields 0.
double top_share(std::vector<double> xs, double fraction);

}  // namespace vcg
