#include "c19vi/forest.hpp"

#include "c19vi/csv.hpp"
#include "c19vi/errors.hpp"
#include "c19vi/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace c19vi::forest {

namespace {

double gini(long long pos, long long total) {
    if (total == 0) return 0.0;
    double p = static_cast<double>(pos) / static_cast<double>(total);
    return 2.0 * p * (1.0 - p);
}

struct NodeWork {
    std::vector<std::size_t> rows; // indices with bootstrap multiplicity
    int node = 0;
    int depth = 0;
};

void validate_common(std::span<const std::vector<double>> rows, std::span<const int> labels,
                     std::size_t n_features, const Hyperparameters& hp) {
    if (rows.empty()) throw DataError("training data is empty");
    if (rows.size() != labels.size()) throw DataError("rows and labels differ in length");
    if (hp.n_trees < 1) throw DataError("n_trees must be >= 1");
    if (hp.min_leaf < 1) throw DataError("min_leaf must be >= 1");
    if (static_cast<long long>(rows.size()) < hp.min_leaf) {
        throw DataError("min_leaf exceeds the number of training rows");
    }
    if (hp.mtry < 1 || static_cast<std::size_t>(hp.mtry) > n_features) {
        throw DataError("mtry must lie in [1, " + std::to_string(n_features) + "], got " +
                        std::to_string(hp.mtry));
    }
    bool has0 = false, has1 = false;
    for (int l : labels) {
        if (l == 0) has0 = true;
        else if (l == 1) has1 = true;
        else throw DataError("labels must be 0 or 1");
    }
    if (!has0 || !has1) throw DataError("training data must contain both labels");
    for (const auto& r : rows) {
        if (r.size() != n_features) throw DataError("feature row width mismatch");
    }
}

} // namespace

Tree grow_tree(std::span<const std::vector<double>> rows, std::span<const int> labels,
               const std::vector<std::size_t>& row_indices, std::size_t n_features,
               const Hyperparameters& hp, Rng& rng) {
    Tree tree;
    std::vector<NodeWork> stack;
    tree.nodes.emplace_back();
    stack.push_back({row_indices, 0, 0});

    std::vector<std::size_t> sorted;
    while (!stack.empty()) {
        NodeWork work = std::move(stack.back());
        stack.pop_back();

        long long total = static_cast<long long>(work.rows.size());
        long long pos = 0;
        for (std::size_t r : work.rows) pos += labels[r];

        TreeNode& leaf_view = tree.nodes[static_cast<std::size_t>(work.node)];
        leaf_view.positive_fraction = static_cast<double>(pos) / static_cast<double>(total);
        leaf_view.sample_count = total;

        bool pure = pos == 0 || pos == total;
        bool depth_capped = hp.max_depth > 0 && work.depth >= hp.max_depth;
        if (pure || depth_capped || total < 2LL * hp.min_leaf) {
            continue; // stays a leaf
        }

        // Candidate features: mtry sampled without replacement, scanned in
        // ascending order so ties in gain resolve deterministically.
        std::vector<std::size_t> features =
            rng.sample_without_replacement(n_features, static_cast<std::size_t>(hp.mtry));
        std::sort(features.begin(), features.end());

        double parent_impurity = gini(pos, total);
        double best_gain = 0.0;
        int best_feature = -1;
        double best_threshold = 0.0;

        for (std::size_t f : features) {
            sorted = work.rows;
            std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
                return rows[a][f] < rows[b][f];
            });
            // Prefix positive counts over the sorted order.
            std::vector<long long> prefix_pos(sorted.size() + 1, 0);
            for (std::size_t i = 0; i < sorted.size(); ++i) {
                prefix_pos[i + 1] = prefix_pos[i] + labels[sorted[i]];
            }
            for (std::size_t i = 1; i < sorted.size(); ++i) {
                double lo = rows[sorted[i - 1]][f];
                double hi = rows[sorted[i]][f];
                if (lo == hi) continue;
                double threshold = (lo + hi) / 2.0;
                // The midpoint can round onto hi; count the left side by the
                // actual <= rule so training and prediction agree.
                std::size_t n_left = i;
                while (n_left < sorted.size() && rows[sorted[n_left]][f] <= threshold) ++n_left;
                long long nl = static_cast<long long>(n_left);
                long long nr = total - nl;
                if (nl < hp.min_leaf || nr < hp.min_leaf) continue;
                double child =
                    (static_cast<double>(nl) * gini(prefix_pos[n_left], nl) +
                     static_cast<double>(nr) * gini(pos - prefix_pos[n_left], nr)) /
                    static_cast<double>(total);
                double gain = parent_impurity - child;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = static_cast<int>(f);
                    best_threshold = threshold;
                }
            }
        }

        if (best_feature < 0) {
            continue; // zero-gain node stays a leaf
        }

        NodeWork left, right;
        left.depth = right.depth = work.depth + 1;
        for (std::size_t r : work.rows) {
            (rows[r][static_cast<std::size_t>(best_feature)] <= best_threshold ? left.rows
                                                                               : right.rows)
                .push_back(r);
        }
        left.node = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        right.node = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();

        TreeNode& node = tree.nodes[static_cast<std::size_t>(work.node)];
        node.feature_index = best_feature;
        node.threshold = best_threshold;
        node.left = left.node;
        node.right = right.node;
        stack.push_back(std::move(right));
        stack.push_back(std::move(left));
    }
    return tree;
}

RandomForestModel train(std::span<const std::vector<double>> rows, std::span<const int> labels,
                        const Hyperparameters& hp, std::vector<std::string> feature_names,
                        int threads) {
    std::size_t n_features = feature_names.size();
    validate_common(rows, labels, n_features, hp);

    RandomForestModel model;
    model.hp = hp;
    model.feature_names = std::move(feature_names);
    model.trees.resize(static_cast<std::size_t>(hp.n_trees));

    const std::size_t n = rows.size();
    parallel_for(model.trees.size(), threads, [&](std::size_t t) {
        Rng rng(derive_seed(hp.seed, Stream::Tree, t));
        std::vector<std::size_t> bootstrap(n);
        for (std::size_t i = 0; i < n; ++i) {
            bootstrap[i] = static_cast<std::size_t>(rng.next_below(n));
        }
        model.trees[t] = grow_tree(rows, labels, bootstrap, n_features, hp, rng);
    });
    return model;
}

RandomForestModel train(const impact::TrainingSet& training, Hyperparameters hp, int threads) {
    std::vector<impact::TrainingRow> rows;
    for (const auto& r : training.rows) {
        if (r.in_train) rows.push_back(r);
    }
    std::sort(rows.begin(), rows.end(),
              [](const impact::TrainingRow& a, const impact::TrainingRow& b) {
                  return a.fips < b.fips;
              });
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    x.reserve(rows.size());
    y.reserve(rows.size());
    for (const auto& r : rows) {
        x.emplace_back(r.features.begin(), r.features.end());
        y.push_back(r.label);
    }
    return train(x, y, hp, {"t1", "t2", "t3", "t4", "t5", "t6"}, threads);
}

namespace {

double tree_fraction(const Tree& tree, std::span<const double> features) {
    int node = 0;
    while (!tree.nodes[static_cast<std::size_t>(node)].is_leaf()) {
        const TreeNode& n = tree.nodes[static_cast<std::size_t>(node)];
        node = features[static_cast<std::size_t>(n.feature_index)] <= n.threshold ? n.left
                                                                                  : n.right;
    }
    return tree.nodes[static_cast<std::size_t>(node)].positive_fraction;
}

} // namespace

double predict(const RandomForestModel& model, std::span<const double> features, VoteMode mode) {
    if (model.trees.empty()) throw DataError("model has no trees");
    if (features.size() != model.feature_names.size()) {
        throw DataError("expected " + std::to_string(model.feature_names.size()) +
                        " features, got " + std::to_string(features.size()));
    }
    double acc = 0.0;
    for (const Tree& t : model.trees) {
        double f = tree_fraction(t, features);
        acc += mode == VoteMode::Soft ? f : (f > 0.5 ? 1.0 : 0.0);
    }
    return acc / static_cast<double>(model.trees.size());
}

const char* to_string(VulnClass c) {
    switch (c) {
    case VulnClass::VeryLow: return "VeryLow";
    case VulnClass::Low: return "Low";
    case VulnClass::Moderate: return "Moderate";
    case VulnClass::High: return "High";
    case VulnClass::VeryHigh: return "VeryHigh";
    }
    return "VeryLow";
}

VulnClass parse_class(const std::string& text) {
    for (VulnClass c : {VulnClass::VeryLow, VulnClass::Low, VulnClass::Moderate, VulnClass::High,
                        VulnClass::VeryHigh}) {
        if (text == to_string(c)) return c;
    }
    throw DataError("unknown vulnerability class '" + text + "'");
}

VulnClass classify(double score) {
    if (!(score >= 0.0 && score <= 1.0)) {
        throw DataError("score " + format_double(score) + " outside [0,1]");
    }
    if (score < 0.2) return VulnClass::VeryLow;
    if (score < 0.4) return VulnClass::Low;
    if (score < 0.6) return VulnClass::Moderate;
    if (score < 0.8) return VulnClass::High;
    return VulnClass::VeryHigh;
}

namespace {

using nlohmann::json;

json node_to_json(const Tree& tree, int index) {
    const TreeNode& n = tree.nodes[static_cast<std::size_t>(index)];
    if (n.is_leaf()) {
        return json{{"positive_fraction", n.positive_fraction}, {"sample_count", n.sample_count}};
    }
    return json{{"feature_index", n.feature_index},
                {"threshold", n.threshold},
                {"left", node_to_json(tree, n.left)},
                {"right", node_to_json(tree, n.right)}};
}

int node_from_json(const json& j, Tree& tree) {
    int index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (j.contains("feature_index")) {
        int feature = j.at("feature_index").get<int>();
        double threshold = j.at("threshold").get<double>();
        int left = node_from_json(j.at("left"), tree);
        int right = node_from_json(j.at("right"), tree);
        TreeNode& n = tree.nodes[static_cast<std::size_t>(index)];
        n.feature_index = feature;
        n.threshold = threshold;
        n.left = left;
        n.right = right;
    } else {
        TreeNode& n = tree.nodes[static_cast<std::size_t>(index)];
        n.positive_fraction = j.at("positive_fraction").get<double>();
        n.sample_count = j.at("sample_count").get<long long>();
        if (!(n.positive_fraction >= 0.0 && n.positive_fraction <= 1.0)) {
            throw DataError("leaf positive_fraction outside [0,1]");
        }
    }
    return index;
}

} // namespace

void save_model(const RandomForestModel& model, const std::string& path) {
    json doc;
    doc["format_version"] = kModelFormatVersion;
    doc["hyperparameters"] = {{"n_trees", model.hp.n_trees},
                              {"mtry", model.hp.mtry},
                              {"max_depth", model.hp.max_depth},
                              {"min_leaf", model.hp.min_leaf},
                              {"seed", model.hp.seed}};
    doc["feature_names"] = model.feature_names;
    json trees = json::array();
    for (const Tree& t : model.trees) {
        trees.push_back(node_to_json(t, 0));
    }
    doc["trees"] = std::move(trees);

    std::ofstream out(path);
    if (!out) throw DataError("cannot open file for writing: " + path);
    out << doc.dump(1) << '\n';
    out.close();
    if (out.fail()) throw DataError("write failed: " + path);
}

RandomForestModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model file: " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError("model file " + path + ": parse error at byte " + std::to_string(e.byte) +
                        ": " + e.what());
    }
    try {
        std::string version = doc.at("format_version").get<std::string>();
        if (version != kModelFormatVersion) {
            throw DataError("model file " + path + ": unsupported format version '" + version +
                            "' (expected '" + kModelFormatVersion + "')");
        }
        RandomForestModel model;
        const json& hp = doc.at("hyperparameters");
        model.hp.n_trees = hp.at("n_trees").get<int>();
        model.hp.mtry = hp.at("mtry").get<int>();
        model.hp.max_depth = hp.at("max_depth").get<int>();
        model.hp.min_leaf = hp.at("min_leaf").get<int>();
        model.hp.seed = hp.at("seed").get<std::uint64_t>();
        model.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
        for (const json& t : doc.at("trees")) {
            Tree tree;
            node_from_json(t, tree);
            model.trees.push_back(std::move(tree));
        }
        if (model.trees.empty()) throw DataError("model file " + path + ": no trees");
        return model;
    } catch (const json::exception& e) {
        throw DataError("model file " + path + ": " + e.what());
    }
}

} // namespace c19vi::forest
