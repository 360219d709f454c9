#include "c19vi/evaluate.hpp"

#include "c19vi/errors.hpp"
#include "c19vi/stats_util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace c19vi::evaluate {

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw DataError("scores and labels differ in length");
    }
    long long n_pos = 0, n_neg = 0;
    for (int l : labels) {
        if (l == 1) ++n_pos;
        else if (l == 0) ++n_neg;
        else throw DataError("labels must be 0 or 1");
    }
    if (n_pos == 0 || n_neg == 0) {
        throw DataError("roc_auc needs both label classes");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Walk tie groups in ascending score order; every positive beats all
    // negatives in strictly lower groups and half-ties within its own group.
    long long wins2 = 0; // doubled so the half-tie credit stays integral
    long long negs_below = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        long long group_pos = 0, group_neg = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] == 1 ? group_pos : group_neg) += 1;
            ++j;
        }
        wins2 += group_pos * (2 * negs_below + group_neg);
        negs_below += group_neg;
        i = j;
    }
    return static_cast<double>(wins2) / (2.0 * static_cast<double>(n_pos) *
                                         static_cast<double>(n_neg));
}

double cronbach_alpha(const std::vector<std::vector<double>>& rows) {
    const std::size_t n = rows.size();
    if (n < 2) throw DataError("cronbach_alpha needs at least 2 rows");
    const std::size_t k = rows[0].size();
    if (k < 2) throw DataError("cronbach_alpha needs at least 2 items");
    for (const auto& r : rows) {
        if (r.size() != k) throw DataError("ragged item matrix");
    }

    double item_var_sum = 0.0;
    std::vector<double> column(n);
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t i = 0; i < n; ++i) column[i] = rows[i][j];
        item_var_sum += sample_variance(column);
    }
    std::vector<double> totals(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) totals[i] += rows[i][j];
    }
    double total_var = sample_variance(totals);
    if (total_var == 0.0) {
        throw DataError("cronbach_alpha: total score variance is zero");
    }
    double kk = static_cast<double>(k);
    return kk / (kk - 1.0) * (1.0 - item_var_sum / total_var);
}

FriedmanResult friedman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DataError("friedman: length mismatch");
    const std::size_t n = a.size();
    if (n < 2) throw DataError("friedman needs at least 2 rows");

    FriedmanResult r;
    r.n = n;
    double sum_a = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (a[i] > b[i]) sum_a += 2.0;
        else if (a[i] < b[i]) sum_a += 1.0;
        else sum_a += 1.5;
    }
    r.mean_rank_a = sum_a / static_cast<double>(n);
    r.mean_rank_b = 3.0 - r.mean_rank_a;

    // chi2 = 12n/(k(k+1)) * sum_j (Rbar_j - (k+1)/2)^2 with k = 2.
    double da = r.mean_rank_a - 1.5;
    double db = r.mean_rank_b - 1.5;
    r.chi2 = 2.0 * static_cast<double>(n) * (da * da + db * db);
    r.df = 1;
    r.p_value = chi_squared_df1_sf(r.chi2);
    return r;
}

namespace {

// Exact two-sided p for the signed-rank statistic: the null probability that
// min(W+, W-) is at most the observed minimum, by counting sign patterns.
// Ranks are doubled so tied (half-integer) ranks stay integral.
double wilcoxon_exact_p(const std::vector<long long>& doubled_ranks, long long doubled_w_min) {
    const std::size_t n = doubled_ranks.size();
    long long total = 0;
    for (long long r : doubled_ranks) total += r;

    // dist[s] = #patterns whose doubled W+ equals s
    std::vector<long long> dist(static_cast<std::size_t>(total) + 1, 0);
    dist[0] = 1;
    long long reached = 0;
    for (long long r : doubled_ranks) {
        for (long long s = reached; s >= 0; --s) {
            if (dist[static_cast<std::size_t>(s)] != 0) {
                dist[static_cast<std::size_t>(s + r)] += dist[static_cast<std::size_t>(s)];
            }
        }
        reached += r;
    }
    long long count = 0;
    for (long long s = 0; s <= total; ++s) {
        if (s <= doubled_w_min || total - s <= doubled_w_min) {
            count += dist[static_cast<std::size_t>(s)];
        }
    }
    return static_cast<double>(count) / std::pow(2.0, static_cast<double>(n));
}

} // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DataError("wilcoxon: length mismatch");

    std::vector<double> diffs;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        if (d != 0.0) diffs.push_back(d);
    }
    if (diffs.empty()) {
        throw DataError("wilcoxon: all differences are zero");
    }
    const std::size_t n = diffs.size();

    std::vector<double> abs_diffs(n);
    for (std::size_t i = 0; i < n; ++i) abs_diffs[i] = std::fabs(diffs[i]);
    std::vector<double> ranks = average_ranks(abs_diffs);

    double w_plus = 0.0, w_minus = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        (diffs[i] > 0 ? w_plus : w_minus) += ranks[i];
    }

    WilcoxonResult r;
    r.n_pairs = n;
    r.w = std::min(w_plus, w_minus);

    double nn = static_cast<double>(n);
    double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
    std::vector<double> sorted = abs_diffs;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
        double t = static_cast<double>(j - i + 1);
        var -= (t * t * t - t) / 48.0;
        i = j + 1;
    }
    double mu = nn * (nn + 1.0) / 4.0;
    // Signed from W+ so swapping the inputs negates z; |z| (and p) match the
    // min-statistic convention since W+ and W- mirror around the mean. The
    // 0.5 continuity correction pulls toward the mean.
    if (var > 0.0 && w_plus != mu) {
        double num = w_plus > mu ? w_plus - mu - 0.5 : w_plus - mu + 0.5;
        r.z = num / std::sqrt(var);
    }
    r.p_value = two_sided_normal_p(r.z);

    if (n <= 12) {
        std::vector<long long> doubled(n);
        for (std::size_t i = 0; i < n; ++i) {
            doubled[i] = static_cast<long long>(std::llround(2.0 * ranks[i]));
        }
        r.exact_p = wilcoxon_exact_p(doubled, static_cast<long long>(std::llround(2.0 * r.w)));
    }
    return r;
}

const char* to_string(BorutaDecision d) {
    switch (d) {
    case BorutaDecision::Confirmed: return "Confirmed";
    case BorutaDecision::Rejected: return "Rejected";
    case BorutaDecision::Tentative: return "Tentative";
    }
    return "Tentative";
}

namespace {

double accuracy(const forest::RandomForestModel& model,
                const std::vector<std::vector<double>>& rows, const std::vector<int>& labels) {
    long long correct = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        int predicted = forest::predict(model, rows[i]) > 0.5 ? 1 : 0;
        correct += predicted == labels[i];
    }
    return static_cast<double>(correct) / static_cast<double>(rows.size());
}

} // namespace

BorutaReport boruta(const std::vector<std::vector<double>>& rows, std::span<const int> labels,
                    std::vector<std::string> feature_names, const BorutaConfig& config,
                    std::vector<std::string>* warnings) {
    const std::size_t n = rows.size();
    const std::size_t n_features = feature_names.size();
    if (n < 4) throw DataError("boruta needs at least 4 rows");
    for (const auto& r : rows) {
        if (r.size() != n_features) throw DataError("feature row width mismatch");
    }
    if (config.max_iterations < 1) throw DataError("max_iterations must be >= 1");

    BorutaReport report;
    report.features.resize(n_features);
    std::vector<double> z_sums(n_features, 0.0);
    std::vector<long long> hits(n_features, 0);
    std::vector<BorutaDecision> decisions(n_features, BorutaDecision::Tentative);

    for (std::size_t f = 0; f < n_features; ++f) {
        double first = rows[0][f];
        bool constant = std::all_of(rows.begin(), rows.end(),
                                    [&](const auto& r) { return r[f] == first; });
        if (constant) {
            decisions[f] = BorutaDecision::Rejected;
            if (warnings) {
                warnings->push_back("boruta: feature " + feature_names[f] +
                                    " is constant; rejected without testing");
            }
        }
    }

    std::size_t holdout_size = std::max<std::size_t>(
        1, static_cast<std::size_t>(config.holdout_frac * static_cast<double>(n)));
    if (holdout_size > n - 2) holdout_size = n - 2;

    int iterations = 0;
    for (int iter = 0; iter < config.max_iterations; ++iter) {
        bool any_tentative = std::any_of(decisions.begin(), decisions.end(), [](BorutaDecision d) {
            return d == BorutaDecision::Tentative;
        });
        if (!any_tentative) break;
        ++iterations;

        Rng rng(derive_seed(config.seed, Stream::BorutaIteration,
                            static_cast<std::uint64_t>(iter)));

        // Augmented matrix: real columns then one shuffled shadow per column.
        std::vector<std::vector<double>> aug(n, std::vector<double>(2 * n_features));
        for (std::size_t i = 0; i < n; ++i) {
            std::copy(rows[i].begin(), rows[i].end(), aug[i].begin());
        }
        for (std::size_t f = 0; f < n_features; ++f) {
            std::vector<std::size_t> perm(n);
            std::iota(perm.begin(), perm.end(), 0);
            rng.shuffle(perm);
            for (std::size_t i = 0; i < n; ++i) {
                aug[i][n_features + f] = rows[perm[i]][f];
            }
        }

        std::vector<std::size_t> holdout = rng.sample_without_replacement(n, holdout_size);
        std::vector<bool> is_holdout(n, false);
        for (std::size_t h : holdout) is_holdout[h] = true;

        std::vector<std::vector<double>> train_x, hold_x;
        std::vector<int> train_y, hold_y;
        for (std::size_t i = 0; i < n; ++i) {
            (is_holdout[i] ? hold_x : train_x).push_back(aug[i]);
            (is_holdout[i] ? hold_y : train_y).push_back(labels[i]);
        }

        forest::Hyperparameters hp;
        hp.n_trees = config.n_trees;
        hp.mtry = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(2 * n_features))));
        hp.seed = rng.next_u64();
        std::vector<std::string> aug_names;
        for (std::size_t f = 0; f < 2 * n_features; ++f) {
            aug_names.push_back(f < n_features ? feature_names[f]
                                               : "shadow_" + feature_names[f - n_features]);
        }
        forest::RandomForestModel model =
            forest::train(train_x, train_y, hp, aug_names, config.threads);
        double baseline = accuracy(model, hold_x, hold_y);

        // Held-out permutation importance per column, averaged over repeats.
        std::vector<double> importance(2 * n_features, 0.0);
        std::vector<double> z_scores(2 * n_features, 0.0);
        std::vector<double> drops(static_cast<std::size_t>(config.permute_repeats));
        for (std::size_t c = 0; c < 2 * n_features; ++c) {
            for (int rep = 0; rep < config.permute_repeats; ++rep) {
                std::vector<std::size_t> perm(hold_x.size());
                std::iota(perm.begin(), perm.end(), 0);
                rng.shuffle(perm);
                std::vector<std::vector<double>> permuted = hold_x;
                for (std::size_t i = 0; i < hold_x.size(); ++i) {
                    permuted[i][c] = hold_x[perm[i]][c];
                }
                drops[static_cast<std::size_t>(rep)] = baseline - accuracy(model, permuted, hold_y);
            }
            importance[c] = mean(drops);
            double sd = std::sqrt(sample_variance(drops));
            if (sd > 0.0) {
                z_scores[c] = importance[c] / sd;
            } else {
                // every repeat produced the same drop; saturate rather than divide by zero
                z_scores[c] = importance[c] == 0.0 ? 0.0 : (importance[c] > 0 ? 99.0 : -99.0);
            }
        }

        double max_shadow = importance[n_features];
        for (std::size_t f = n_features + 1; f < 2 * n_features; ++f) {
            max_shadow = std::max(max_shadow, importance[f]);
        }

        long long undecided = 0;
        for (std::size_t f = 0; f < n_features; ++f) {
            z_sums[f] += z_scores[f];
            if (decisions[f] == BorutaDecision::Tentative && importance[f] > max_shadow) {
                ++hits[f];
            }
            undecided += decisions[f] == BorutaDecision::Tentative;
        }

        for (std::size_t f = 0; f < n_features; ++f) {
            if (decisions[f] != BorutaDecision::Tentative) continue;
            double p = binomial_two_sided_half(hits[f], iterations);
            if (p * static_cast<double>(undecided) < config.p_threshold) {
                decisions[f] = 2 * hits[f] > iterations ? BorutaDecision::Confirmed
                                                        : BorutaDecision::Rejected;
            }
        }
    }

    report.iterations_run = iterations;
    for (std::size_t f = 0; f < n_features; ++f) {
        report.features[f].name = feature_names[f];
        report.features[f].hits = hits[f];
        report.features[f].decision = decisions[f];
        report.features[f].mean_importance =
            iterations > 0 ? z_sums[f] / static_cast<double>(iterations) : 0.0;
    }
    return report;
}

} // namespace c19vi::evaluate
