#include "c19vi/tstats.hpp"

#include "c19vi/errors.hpp"
#include "c19vi/stats_util.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

namespace c19vi::tstats {

const char* to_string(Direction d) {
    switch (d) {
    case Direction::Increasing: return "Increasing";
    case Direction::Decreasing: return "Decreasing";
    case Direction::NoTrend: return "NoTrend";
    }
    return "NoTrend";
}

TrendResult mann_kendall(std::span<const double> series, double alpha) {
    if (alpha <= 0.0 || alpha >= 1.0) {
        throw DataError("alpha must lie in (0,1)");
    }
    const std::size_t n = series.size();
    TrendResult r;
    r.n = n;
    if (n >= 2) r.slope = sen_slope(series);
    if (n < kMinSamples) {
        r.short_series = true;
        return r;
    }

    long long s = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double d = series[j] - series[i];
            s += (d > 0) - (d < 0);
        }
    }
    r.s_statistic = s;

    // Tie groups by exact value equality; the inputs are counts and ratios.
    std::map<double, long long> groups;
    for (double v : series) ++groups[v];
    double nn = static_cast<double>(n);
    double var = nn * (nn - 1.0) * (2.0 * nn + 5.0);
    for (const auto& [value, t] : groups) {
        double tt = static_cast<double>(t);
        var -= tt * (tt - 1.0) * (2.0 * tt + 5.0);
    }
    var /= 18.0;
    r.variance = var;

    if (s != 0 && var > 0.0) {
        double num = s > 0 ? static_cast<double>(s) - 1.0 : static_cast<double>(s) + 1.0;
        r.z = num / std::sqrt(var);
    }
    r.p_value = two_sided_normal_p(r.z);
    if (r.p_value < alpha && s != 0) {
        r.direction = s > 0 ? Direction::Increasing : Direction::Decreasing;
    }
    return r;
}

double sen_slope(std::span<const double> series) {
    const std::size_t n = series.size();
    if (n < 2) {
        throw DataError("sen_slope requires at least 2 observations");
    }
    std::vector<double> slopes;
    slopes.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            slopes.push_back((series[j] - series[i]) / static_cast<double>(j - i));
        }
    }
    std::sort(slopes.begin(), slopes.end());
    std::size_t m = slopes.size();
    if (m % 2 == 1) return slopes[m / 2];
    return (slopes[m / 2 - 1] + slopes[m / 2]) / 2.0;
}

std::vector<long long> pettitt_u_values(std::span<const double> series) {
    const std::size_t n = series.size();
    std::vector<long long> u_values;
    if (n < 2) return u_values;
    u_values.reserve(n - 1);
    // Doubled ranks keep the accumulation integral through tied groups.
    std::vector<double> ranks = average_ranks(series);
    long long sum2r = 0;
    for (std::size_t t = 0; t + 1 < n; ++t) {
        sum2r += static_cast<long long>(2.0 * ranks[t]);
        u_values.push_back(sum2r -
                           static_cast<long long>(t + 1) * static_cast<long long>(n + 1));
    }
    return u_values;
}

ChangePointResult pettitt(std::span<const double> series, double alpha) {
    if (alpha <= 0.0 || alpha >= 1.0) {
        throw DataError("alpha must lie in (0,1)");
    }
    const std::size_t n = series.size();
    ChangePointResult r;
    if (n < kMinSamples) {
        r.short_series = true;
        return r;
    }

    std::vector<long long> u_values = pettitt_u_values(series);
    long long best = 0;
    std::size_t best_t = 0;
    for (std::size_t t = 0; t < u_values.size(); ++t) {
        long long a = u_values[t] < 0 ? -u_values[t] : u_values[t];
        if (a > best) {
            best = a;
            best_t = t;
        }
    }
    r.k_statistic = best;
    r.changepoint = best_t;

    double nn = static_cast<double>(n);
    double k = static_cast<double>(best);
    r.p_value = std::min(1.0, 2.0 * std::exp(-6.0 * k * k / (nn * nn * nn + nn * nn)));
    r.homogeneous = r.p_value >= alpha;
    return r;
}

} // namespace c19vi::tstats
