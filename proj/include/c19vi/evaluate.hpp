#pragma once

#include "c19vi/forest.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace c19vi::evaluate {

// AUC via the Mann-Whitney pair-counting identity:
// (wins + 0.5*ties) / (n_pos * n_neg). Throws DataError when only one label
// class is present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

// alpha = k/(k-1) * (1 - sum(item variances)/variance(row sums)), unbiased
// (n-1) variances. `rows` is n_rows x k_items.
double cronbach_alpha(const std::vector<std::vector<double>>& rows);

struct FriedmanResult {
    double chi2 = 0.0;
    int df = 1;
    double p_value = 1.0;
    double mean_rank_a = 0.0;
    double mean_rank_b = 0.0;
    std::size_t n = 0;
};

// Friedman test for two paired treatments (per-row average ranks on ties).
FriedmanResult friedman(std::span<const double> a, std::span<const double> b);

struct WilcoxonResult {
    double w = 0.0;       // min(W+, W-)
    double z = 0.0;       // signed: positive when a tends above b
    double p_value = 1.0; // two-sided, normal approximation
    std::size_t n_pairs = 0;                // after dropping zero differences
    std::optional<double> exact_p;          // exact enumeration, n' <= 12
};

// Two-tailed Wilcoxon signed-rank test; zero differences dropped, average
// ranks and tie-corrected variance. Throws DataError when all differences
// are zero.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

struct ValidationReport {
    double train_auc = 0.0;
    double test_auc = 0.0;
    double cronbach_alpha = 0.0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
};

struct ComparisonReport {
    double friedman_chi2 = 0.0;
    int friedman_df = 1;
    double friedman_p = 1.0;
    double mean_rank_a = 0.0;
    double mean_rank_b = 0.0;
    double wilcoxon_w = 0.0;
    double wilcoxon_z = 0.0;
    double wilcoxon_p = 1.0;
    std::optional<double> wilcoxon_exact_p;
    std::size_t n_pairs = 0;
};

enum class BorutaDecision { Confirmed, Rejected, Tentative };

const char* to_string(BorutaDecision d);

struct BorutaFeature {
    std::string name;
    double mean_importance = 0.0; // mean of per-iteration importance Z-scores
    long long hits = 0;
    BorutaDecision decision = BorutaDecision::Tentative;
};

struct BorutaReport {
    std::vector<BorutaFeature> features;
    int iterations_run = 0;
};

struct BorutaConfig {
    int max_iterations = 100;
    double p_threshold = 0.01;
    std::uint64_t seed = 0;
    int n_trees = 100;        // per-iteration forest size
    double holdout_frac = 1.0 / 3.0;
    int permute_repeats = 5;  // permutations averaged per importance estimate
    int threads = 1;
};

// Shadow-feature selection: each iteration trains a forest on the real
// features plus one permuted shadow per feature, scores every column by
// held-out permutation importance, and counts a hit when a real feature beats
// the best shadow. Binomial tests (Bonferroni over undecided features) move
// features to Confirmed/Rejected.
BorutaReport boruta(const std::vector<std::vector<double>>& rows, std::span<const int> labels,
                    std::vector<std::string> feature_names, const BorutaConfig& config,
                    std::vector<std::string>* warnings = nullptr);

} // namespace c19vi::evaluate
