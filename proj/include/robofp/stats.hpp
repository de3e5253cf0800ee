// stats.hpp
//
// Descriptive statistics shared by the signal-processing and feature modules.
// Degenerate inputs (empty sets, zero variance) yield 0 rather than NaN.

#ifndef ROBOFP_STATS_HPP
#define ROBOFP_STATS_HPP

#include <span>
#include <vector>

namespace robofp {

/// linear-interpolation percentile of an ascending sequence, q in [0, 100]
double percentile_sorted(std::span<const double> sorted, double q);
double percentile(std::span<const double> values, double q);

struct Moments {
    double mean = 0.0;
    double std = 0.0;        ///< population standard deviation
    double skewness = 0.0;   ///< Fisher-Pearson, population
    double kurtosis = 0.0;   ///< excess kurtosis, population
};

Moments moments(std::span<const double> values);

} // namespace robofp

#endif // ROBOFP_STATS_HPP
