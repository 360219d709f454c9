#pragma once

#include "c19vi/impact.hpp"
#include "c19vi/rng.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace c19vi::forest {

// Flat tree storage: children are indices into the node vector, -1 feature
// marks a leaf. Kept POD-ish for cheap traversal and simple persistence.
struct TreeNode {
    int feature_index = -1;
    double threshold = 0.0;
    int left = -1;  // rows with feature <= threshold
    int right = -1;
    double positive_fraction = 0.0;
    long long sample_count = 0;

    bool is_leaf() const { return feature_index < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes; // root at index 0
};

struct Hyperparameters {
    int n_trees = 500;
    int mtry = 2;      // floor(sqrt(6)) for the six theme features
    int max_depth = 0; // 0 = unlimited
    int min_leaf = 1;
    std::uint64_t seed = 0;
};

struct RandomForestModel {
    std::vector<Tree> trees;
    Hyperparameters hp;
    std::vector<std::string> feature_names;
};

enum class VoteMode {
    Soft, // mean leaf positive fraction (the default continuous index)
    Hard  // fraction of trees whose leaf majority is positive
};

// Grows one tree on the given rows without bootstrapping; exposed for the
// split-search tests and the Boruta wrapper.
Tree grow_tree(std::span<const std::vector<double>> rows, std::span<const int> labels,
               const std::vector<std::size_t>& row_indices, std::size_t n_features,
               const Hyperparameters& hp, Rng& rng);

// Trains n_trees trees, each on a bootstrap sample drawn from a generator
// seeded by (seed, tree_index); results are independent of thread count.
RandomForestModel train(std::span<const std::vector<double>> rows, std::span<const int> labels,
                        const Hyperparameters& hp, std::vector<std::string> feature_names,
                        int threads = 1);

// Trains on the train-split rows of a TrainingSet. Rows are first sorted by
// FIPS so the model is invariant to input order.
RandomForestModel train(const impact::TrainingSet& training, Hyperparameters hp, int threads = 1);

double predict(const RandomForestModel& model, std::span<const double> features,
               VoteMode mode = VoteMode::Soft);

enum class VulnClass { VeryLow, Low, Moderate, High, VeryHigh };

const char* to_string(VulnClass c);
VulnClass parse_class(const std::string& text);

struct VulnerabilityScore {
    std::string fips;
    double c19vi = 0.0;
    VulnClass cls = VulnClass::VeryLow;
};

// Half-open bins closed at the top: [0,.2) [.2,.4) [.4,.6) [.6,.8) [.8,1].
// Throws DataError outside [0,1].
VulnClass classify(double score);

// Versioned JSON document; numbers round-trip exactly.
void save_model(const RandomForestModel& model, const std::string& path);
RandomForestModel load_model(const std::string& path);

inline constexpr const char* kModelFormatVersion = "c19vi-rf-1";

} // namespace c19vi::forest
