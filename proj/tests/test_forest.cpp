#include "c19vi/forest.hpp"

#include "c19vi/errors.hpp"
#include "c19vi/rng.hpp"
#include "oracles.hpp"
#include "temp_files.hpp"

#include <doctest.h>

#include <algorithm>
#include <array>
#include <numeric>
#include <string>
#include <vector>

using namespace c19vi;

namespace {

std::vector<std::string> names(std::size_t k) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back("t" + std::to_string(i + 1));
    return out;
}

// label = t5 > 0.5, all other themes uninformative noise
impact::TrainingSet separable_fixture(std::size_t n_per_class, std::uint64_t seed,
                                      double train_frac = 0.70) {
    Rng rng(seed);
    impact::TrainingSet set;
    set.seed = seed;
    int fips = 20000;
    for (std::size_t i = 0; i < 2 * n_per_class; ++i) {
        impact::TrainingRow row;
        row.fips = std::to_string(fips++);
        row.label = i < n_per_class ? 1 : 0;
        for (auto& f : row.features) f = rng.next_double();
        row.features[4] = row.label == 1 ? 0.55 + 0.45 * rng.next_double()
                                         : 0.45 * rng.next_double();
        row.in_train = (i % static_cast<std::size_t>(10)) <
                       static_cast<std::size_t>(train_frac * 10.0);
        set.rows.push_back(std::move(row));
    }
    return set;
}

} // namespace

TEST_CASE("grow_tree picks the same split as exhaustive Gini search") {
    SUBCASE("4-row hand dataset") {
        std::vector<std::vector<double>> rows{{0.1, 0.9}, {0.2, 0.1}, {0.8, 0.8}, {0.9, 0.2}};
        std::vector<int> labels{0, 0, 1, 1};
        forest::Hyperparameters hp;
        hp.mtry = 2;
        Rng rng(1);
        std::vector<std::size_t> idx(rows.size());
        std::iota(idx.begin(), idx.end(), 0);
        auto tree = forest::grow_tree(rows, labels, idx, 2, hp, rng);

        int feature;
        double threshold;
        oracles::best_gini_split(rows, labels, feature, threshold);
        CHECK(feature == 0);
        CHECK(threshold == 0.5);
        REQUIRE_FALSE(tree.nodes.empty());
        CHECK(tree.nodes[0].feature_index == feature);
        CHECK(tree.nodes[0].threshold == threshold);
    }
    SUBCASE("random datasets, all features in play") {
        Rng rng(2);
        for (int trial = 0; trial < 30; ++trial) {
            std::size_t n = 6 + rng.next_below(10);
            std::vector<std::vector<double>> rows(n, std::vector<double>(3));
            std::vector<int> labels(n);
            bool has0 = false, has1 = false;
            for (std::size_t i = 0; i < n; ++i) {
                for (auto& v : rows[i]) v = static_cast<double>(rng.next_below(6)) / 5.0;
                labels[i] = static_cast<int>(rng.next_below(2));
                (labels[i] ? has1 : has0) = true;
            }
            if (!has0 || !has1) continue;

            forest::Hyperparameters hp;
            hp.mtry = 3;
            Rng tree_rng(trial);
            std::vector<std::size_t> idx(n);
            std::iota(idx.begin(), idx.end(), 0);
            auto tree = forest::grow_tree(rows, labels, idx, 3, hp, tree_rng);

            int feature;
            double threshold;
            double gain = oracles::best_gini_split(rows, labels, feature, threshold);
            if (gain <= 0.0) {
                CHECK(tree.nodes[0].is_leaf());
            } else {
                CHECK(tree.nodes[0].feature_index == feature);
                CHECK(tree.nodes[0].threshold == threshold);
            }
        }
    }
}

TEST_CASE("a pure-label dataset collapses to a single leaf") {
    std::vector<std::vector<double>> rows{{0.1}, {0.5}, {0.9}};
    std::vector<int> labels{1, 1, 1};
    // train() requires both classes, so exercise the grower directly.
    forest::Hyperparameters hp;
    hp.mtry = 1;
    hp.max_depth = 1;
    Rng rng(3);
    std::vector<std::size_t> idx{0, 1, 2};
    auto tree = forest::grow_tree(rows, labels, idx, 1, hp, rng);
    REQUIRE(tree.nodes.size() == 1);
    CHECK(tree.nodes[0].is_leaf());
    CHECK(tree.nodes[0].positive_fraction == 1.0);
    CHECK(tree.nodes[0].sample_count == 3);
}

TEST_CASE("training separates the synthetic fixture") {
    auto training = separable_fixture(200, 41);
    forest::Hyperparameters hp;
    hp.n_trees = 200;
    hp.seed = 41;
    auto model = forest::train(training, hp);

    std::array<double, 6> high{0.5, 0.5, 0.5, 0.5, 0.9, 0.5};
    std::array<double, 6> low{0.5, 0.5, 0.5, 0.5, 0.1, 0.5};
    CHECK(forest::predict(model, high) > 0.9);
    CHECK(forest::predict(model, low) < 0.1);

    SUBCASE("training accuracy is at least test accuracy") {
        long long train_ok = 0, train_n = 0, test_ok = 0, test_n = 0;
        for (const auto& row : training.rows) {
            int hat = forest::predict(model, row.features) > 0.5 ? 1 : 0;
            if (row.in_train) {
                ++train_n;
                train_ok += hat == row.label;
            } else {
                ++test_n;
                test_ok += hat == row.label;
            }
        }
        CHECK(static_cast<double>(train_ok) / train_n >=
              static_cast<double>(test_ok) / test_n);
    }
    SUBCASE("predictions stay in [0,1] with any input") {
        Rng rng(5);
        for (int i = 0; i < 200; ++i) {
            std::array<double, 6> x;
            for (auto& v : x) v = rng.next_normal() * 3.0;
            double p = forest::predict(model, x);
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
        }
    }
}

TEST_CASE("training is deterministic and order-independent") {
    TempDir dir;
    auto training = separable_fixture(50, 17);
    forest::Hyperparameters hp;
    hp.n_trees = 40;
    hp.seed = 17;

    auto a = forest::train(training, hp);
    forest::save_model(a, dir.file("a.json"));

    auto b = forest::train(training, hp);
    forest::save_model(b, dir.file("b.json"));
    CHECK(read_file(dir.file("a.json")) == read_file(dir.file("b.json")));

    // Shuffled row order: the canonical FIPS sort restores the same model.
    Rng rng(99);
    rng.shuffle(training.rows);
    auto c = forest::train(training, hp);
    forest::save_model(c, dir.file("c.json"));
    CHECK(read_file(dir.file("a.json")) == read_file(dir.file("c.json")));

    // Thread count must not matter.
    auto d = forest::train(training, hp, 8);
    forest::save_model(d, dir.file("d.json"));
    CHECK(read_file(dir.file("a.json")) == read_file(dir.file("d.json")));
}

TEST_CASE("predict averages leaf fractions") {
    forest::RandomForestModel model;
    model.feature_names = names(1);
    forest::Tree leaf1, leaf0;
    leaf1.nodes.push_back({-1, 0.0, -1, -1, 1.0, 10});
    leaf0.nodes.push_back({-1, 0.0, -1, -1, 0.0, 10});

    SUBCASE("single all-positive leaf") {
        model.trees = {leaf1};
        CHECK(forest::predict(model, std::vector<double>{0.3}) == 1.0);
    }
    SUBCASE("mean of two opposite trees") {
        model.trees = {leaf1, leaf0};
        CHECK(forest::predict(model, std::vector<double>{0.3}) == 0.5);
    }
    SUBCASE("hard voting counts majorities") {
        forest::Tree weak;
        weak.nodes.push_back({-1, 0.0, -1, -1, 0.6, 10});
        model.trees = {weak, weak, leaf0};
        CHECK(forest::predict(model, std::vector<double>{0.3}, forest::VoteMode::Hard) ==
              doctest::Approx(2.0 / 3.0));
        CHECK(forest::predict(model, std::vector<double>{0.3}) ==
              doctest::Approx((0.6 + 0.6 + 0.0) / 3.0));
    }
}

TEST_CASE("classify bins the continuous index") {
    using forest::VulnClass;
    CHECK(forest::classify(0.85) == VulnClass::VeryHigh);
    CHECK(forest::classify(0.0) == VulnClass::VeryLow);
    CHECK(forest::classify(0.6) == VulnClass::High); // boundary joins the upper bin
    CHECK(forest::classify(0.2) == VulnClass::Low);
    CHECK(forest::classify(0.4) == VulnClass::Moderate);
    CHECK(forest::classify(0.8) == VulnClass::VeryHigh);
    CHECK(forest::classify(1.0) == VulnClass::VeryHigh);
    CHECK(forest::classify(0.19999) == VulnClass::VeryLow);
    CHECK_THROWS_AS(forest::classify(1.01), DataError);
    CHECK_THROWS_AS(forest::classify(-0.01), DataError);
}

TEST_CASE("model files round-trip exactly") {
    TempDir dir;
    auto training = separable_fixture(40, 23);
    forest::Hyperparameters hp;
    hp.n_trees = 25;
    hp.seed = 23;
    auto model = forest::train(training, hp);
    forest::save_model(model, dir.file("model.json"));
    auto loaded = forest::load_model(dir.file("model.json"));

    CHECK(loaded.hp.n_trees == model.hp.n_trees);
    CHECK(loaded.feature_names == model.feature_names);
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        std::array<double, 6> x;
        for (auto& v : x) v = rng.next_double();
        CHECK(forest::predict(model, x) == forest::predict(loaded, x));
    }
}

TEST_CASE("model loading rejects bad files") {
    TempDir dir;
    SUBCASE("unknown version") {
        write_file(dir.file("bad.json"),
                   R"({"format_version":"c19vi-rf-999","hyperparameters":{},"feature_names":[],"trees":[]})");
        CHECK_THROWS_WITH_AS(forest::load_model(dir.file("bad.json")),
                             doctest::Contains("version"), DataError);
    }
    SUBCASE("truncated file reports a byte offset") {
        write_file(dir.file("trunc.json"), R"({"format_version":"c19vi-rf-1","trees":[{"posi)");
        CHECK_THROWS_WITH_AS(forest::load_model(dir.file("trunc.json")),
                             doctest::Contains("byte"), DataError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(forest::load_model(dir.file("absent.json")), DataError);
    }
}

TEST_CASE("training rejects invalid inputs") {
    std::vector<std::vector<double>> rows{{0.1}, {0.9}};
    forest::Hyperparameters hp;
    hp.mtry = 1;
    SUBCASE("single-class labels") {
        std::vector<int> labels{1, 1};
        CHECK_THROWS_AS(forest::train(rows, labels, hp, names(1)), DataError);
    }
    SUBCASE("mtry larger than the feature count") {
        std::vector<int> labels{0, 1};
        hp.mtry = 2;
        CHECK_THROWS_AS(forest::train(rows, labels, hp, names(1)), DataError);
    }
    SUBCASE("empty training data") {
        std::vector<std::vector<double>> empty;
        std::vector<int> labels;
        CHECK_THROWS_AS(forest::train(empty, labels, hp, names(1)), DataError);
    }
}
