#include "c19vi/stats_util.hpp"

#include <algorithm>
#include <numeric>

namespace c19vi {

std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        // Tied block occupies positions i..j (0-based); average 1-based rank.
        double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double mean(std::span<const double> values) {
    if (values.empty()) return 0.0;
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 2) return 0.0;
    double m = mean(values);
    double acc = 0.0;
    for (double v : values) acc += (v - m) * (v - m);
    return acc / static_cast<double>(n - 1);
}

namespace {

// log C(n, k) via lgamma
double log_choose(long long n, long long k) {
    return std::lgamma(double(n) + 1.0) - std::lgamma(double(k) + 1.0) -
           std::lgamma(double(n - k) + 1.0);
}

} // namespace

double binomial_cdf_half(long long k, long long n) {
    if (k < 0) return 0.0;
    if (k >= n) return 1.0;
    double log_half_n = -double(n) * std::log(2.0);
    double p = 0.0;
    for (long long i = 0; i <= k; ++i) {
        p += std::exp(log_choose(n, i) + log_half_n);
    }
    return std::min(1.0, p);
}

double binomial_two_sided_half(long long k, long long n) {
    double lower = binomial_cdf_half(k, n);
    double upper = 1.0 - binomial_cdf_half(k - 1, n);
    return std::min(1.0, 2.0 * std::min(lower, upper));
}

} // namespace c19vi
