#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace c19vi {

// Two-sided tail probability of the standard normal at |z|.
inline double two_sided_normal_p(double z) {
    return std::erfc(std::fabs(z) / std::sqrt(2.0));
}

// Upper tail of the chi-squared distribution with one degree of freedom.
inline double chi_squared_df1_sf(double x) {
    if (x <= 0.0) return 1.0;
    return std::erfc(std::sqrt(x / 2.0));
}

// 1-based ranks with average ranks on ties (exact floating-point equality).
std::vector<double> average_ranks(std::span<const double> values);

// Unbiased (n-1) sample variance.
double sample_variance(std::span<const double> values);

double mean(std::span<const double> values);

// Exact Binomial(n, 0.5) tail sums; used by the Boruta hit tests.
double binomial_cdf_half(long long k, long long n);            // P(X <= k)
double binomial_two_sided_half(long long k, long long n);      // min(1, 2*min(P(X<=k), P(X>=k)))

} // namespace c19vi
