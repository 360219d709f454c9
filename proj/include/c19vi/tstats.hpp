#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace c19vi::tstats {

// Segments shorter than this return the neutral outcome (NoTrend /
// homogeneous) instead of erroring, so every county always classifies.
inline constexpr std::size_t kMinSamples = 5;

enum class Direction { Increasing, Decreasing, NoTrend };

const char* to_string(Direction d);

struct TrendResult {
    Direction direction = Direction::NoTrend;
    long long s_statistic = 0; // Kendall S
    double variance = 0.0;     // tie-corrected Var(S)
    double z = 0.0;            // continuity-corrected normal deviate
    double p_value = 1.0;      // two-sided
    double slope = 0.0;        // Theil-Sen estimate, units per day
    std::size_t n = 0;
    bool short_series = false; // n < kMinSamples
};

struct ChangePointResult {
    bool homogeneous = true;
    long long k_statistic = 0;   // max_t |U_t|
    std::size_t changepoint = 0; // argmax tau, first occurrence on ties
    double p_value = 1.0;
    bool short_series = false;
};

// Mann-Kendall trend test with tie-corrected variance and continuity
// correction, slope from the Theil-Sen estimator.
TrendResult mann_kendall(std::span<const double> series, double alpha);

// Median of all pairwise slopes (x_j - x_i)/(j - i), i < j. Throws DataError
// for n < 2.
double sen_slope(std::span<const double> series);

// Pettitt single-changepoint test with the classical asymptotic p-value
// p = min(1, 2*exp(-6K^2/(n^3 + n^2))).
ChangePointResult pettitt(std::span<const double> series, double alpha);

// The U_t profile for t in [0, n-2], computed by the rank identity
// U_t = 2*sum_{i<=t} rank_i - (t+1)(n+1). Always integral.
std::vector<long long> pettitt_u_values(std::span<const double> series);

} // namespace c19vi::tstats
