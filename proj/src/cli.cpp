#include "c19vi/cli.hpp"

#include "c19vi/csv.hpp"
#include "c19vi/errors.hpp"
#include "c19vi/sha256.hpp"
#include "c19vi/stats_util.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace c19vi::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw UsageError(what);
}

std::string iso_timestamp_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void print_effective_config(const PipelineConfig& config, std::ostream& out) {
    out << "# effective config\n" << config_to_json(config).dump(1) << "\n";
}

void print_warnings(const std::vector<std::string>& warnings, std::ostream& out) {
    for (const auto& w : warnings) out << "warning: " << w << "\n";
}

forest::Hyperparameters forest_hp(const PipelineConfig& config) {
    forest::Hyperparameters hp;
    hp.n_trees = config.n_trees;
    hp.mtry = config.mtry;
    hp.max_depth = config.max_depth;
    hp.min_leaf = config.min_leaf;
    hp.seed = config.seed.value_or(0);
    return hp;
}

std::vector<ingest::CountySeries> load_series_from(const PipelineConfig& config,
                                                   ingest::LoadReport& report) {
    require(!config.cases_path.empty() && !config.deaths_path.empty(),
            "impact needs --cases and --deaths");
    return ingest::load_series(config.cases_path, config.deaths_path, config.end_date,
                               config.diff, &report);
}

std::vector<impact::ImpactResult> impacts_from(const PipelineConfig& config, std::ostream& out) {
    if (!config.impact_path.empty()) {
        return load_impact_csv(config.impact_path);
    }
    ingest::LoadReport report;
    auto series = load_series_from(config, report);
    print_warnings(report.warnings, out);
    return impact::assess_all(series, config.alpha, config.threads);
}

void print_histogram(const std::vector<impact::ImpactResult>& results, std::ostream& out) {
    std::map<int, std::size_t> counts{{1, 0}, {2, 0}, {3, 0}, {4, 0}, {5, 0},
                                      {impact::kNonSignificantRank, 0}};
    for (const auto& r : results) ++counts[r.rank];
    std::size_t peak = 1;
    for (const auto& [rank, n] : counts) peak = std::max(peak, n);
    out << "impact rank histogram (" << results.size() << " counties)\n";
    static const char* names[] = {"very high (1)", "high (2)", "moderate (3)",
                                  "low (4)", "very low (5)", "non-significant"};
    static const int ranks[] = {1, 2, 3, 4, 5, impact::kNonSignificantRank};
    for (int row = 0; row < 6; ++row) {
        std::size_t n = counts[ranks[row]];
        std::size_t bar = (40 * n + peak - 1) / peak;
        std::string label = names[row];
        out << "  " << label << std::string(18 - label.size(), ' ') << std::string(bar, '#')
            << " " << n << "\n";
    }
}

std::string fingerprint(const std::string& path) {
    return sha256_file_hex(path);
}

// Rows of the six theme columns keyed by FIPS, FIPS-sorted.
std::map<std::string, std::array<double, 6>> theme_map(
    const std::vector<ingest::ThemeVector>& themes) {
    std::map<std::string, std::array<double, 6>> map;
    for (const auto& t : themes) map.emplace(t.fips, t.t);
    return map;
}

std::vector<forest::VulnerabilityScore> predict_scores(const forest::RandomForestModel& model,
                                                       const std::vector<ingest::ThemeVector>& themes,
                                                       bool hard_vote,
                                                       std::vector<std::string>* warnings) {
    std::vector<forest::VulnerabilityScore> out;
    out.reserve(themes.size());
    for (const auto& t : themes) {
        for (std::size_t i = 0; i < t.t.size(); ++i) {
            if (t.t[i] < 0.0 || t.t[i] > 1.0) {
                if (warnings) {
                    warnings->push_back("FIPS " + t.fips + ": theme t" + std::to_string(i + 1) +
                                        " outside [0,1]; prediction proceeds");
                }
            }
        }
        forest::VulnerabilityScore s;
        s.fips = t.fips;
        s.c19vi = forest::predict(model, t.t,
                                  hard_vote ? forest::VoteMode::Hard : forest::VoteMode::Soft);
        s.cls = forest::classify(s.c19vi);
        out.push_back(std::move(s));
    }
    return out;
}

struct ValidationOutcome {
    evaluate::ValidationReport report;
    json to_json() const {
        return json{{"train_auc", report.train_auc},
                    {"test_auc", report.test_auc},
                    {"cronbach_alpha", report.cronbach_alpha},
                    {"n_train", report.n_train},
                    {"n_test", report.n_test}};
    }
};

ValidationOutcome validate_model(const forest::RandomForestModel& model,
                                 const impact::TrainingSet& training,
                                 const std::vector<ingest::ThemeVector>& themes,
                                 const std::vector<forest::VulnerabilityScore>* scores,
                                 bool include_c19vi_item, bool hard_vote) {
    ValidationOutcome outcome;
    std::vector<double> train_scores, test_scores;
    std::vector<int> train_labels, test_labels;
    for (const auto& row : training.rows) {
        double p = forest::predict(model, row.features,
                                   hard_vote ? forest::VoteMode::Hard : forest::VoteMode::Soft);
        if (row.in_train) {
            train_scores.push_back(p);
            train_labels.push_back(row.label);
        } else {
            test_scores.push_back(p);
            test_labels.push_back(row.label);
        }
    }
    if (test_scores.empty()) {
        throw DataError("validation: the test split is empty (train_frac leaves no held-out "
                        "rows)");
    }
    outcome.report.n_train = train_scores.size();
    outcome.report.n_test = test_scores.size();
    outcome.report.train_auc = evaluate::roc_auc(train_scores, train_labels);
    outcome.report.test_auc = evaluate::roc_auc(test_scores, test_labels);

    std::map<std::string, double> score_by_fips;
    if (scores) {
        for (const auto& s : *scores) score_by_fips.emplace(s.fips, s.c19vi);
    }
    std::vector<std::vector<double>> items;
    for (const auto& t : themes) {
        std::vector<double> row(t.t.begin(), t.t.end());
        if (include_c19vi_item) {
            auto it = score_by_fips.find(t.fips);
            if (it == score_by_fips.end()) continue; // no score for this county
            row.push_back(it->second);
        }
        items.push_back(std::move(row));
    }
    outcome.report.cronbach_alpha = evaluate::cronbach_alpha(items);
    return outcome;
}

void write_json_file(const std::string& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open file for writing: " + path);
    out << doc.dump(1) << '\n';
    out.close();
    if (out.fail()) throw DataError("write failed: " + path);
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(path + ": parse error at byte " + std::to_string(e.byte) + ": " +
                        e.what());
    }
}

// Accepts either an index CSV (fips,value) or a scores CSV (fips,c19vi,class).
std::vector<ingest::IndexColumn> load_any_index(const std::string& path) {
    CsvReader probe(path);
    CsvRow header;
    if (!probe.next(header)) throw DataError(path + ": malformed header: file is empty");
    if (header.fields.size() == 3) {
        auto scores = load_scores_csv(path);
        std::vector<ingest::IndexColumn> out;
        out.reserve(scores.size());
        for (const auto& s : scores) out.push_back({s.fips, s.c19vi});
        return out;
    }
    return ingest::load_index(path);
}

} // namespace

void apply_config_file(PipelineConfig& config, const std::string& path) {
    json doc = read_json_file(path);
    if (!doc.is_object()) throw DataError(path + ": config must be a JSON object");
    auto str = [&](const char* key, std::string& slot) {
        if (doc.contains(key)) slot = doc.at(key).get<std::string>();
    };
    str("cases", config.cases_path);
    str("deaths", config.deaths_path);
    str("themes", config.themes_path);
    str("census", config.census_path);
    str("ccvi", config.ccvi_path);
    str("boundaries", config.boundaries_path);
    str("impact", config.impact_path);
    str("model", config.model_path);
    str("manifest", config.manifest_path);
    str("scores", config.scores_path);
    str("overlay", config.overlay_path);
    str("index", config.index_path);
    str("out", config.out_path);
    str("out-dir", config.out_dir);
    str("model-out", config.model_out);
    str("manifest-out", config.manifest_out);
    str("attribute", config.attribute);
    str("fips-property", config.fips_property);
    str("index-cut", config.index_cut);
    if (doc.contains("end-date")) {
        config.end_date = Date::parse_iso(doc.at("end-date").get<std::string>());
    }
    if (doc.contains("seed")) config.seed = doc.at("seed").get<std::uint64_t>();
    auto num = [&](const char* key, auto& slot) {
        if (doc.contains(key)) slot = doc.at(key).get<std::decay_t<decltype(slot)>>();
    };
    num("alpha", config.alpha);
    num("n-per-class", config.n_per_class);
    num("train-frac", config.train_frac);
    num("trees", config.n_trees);
    num("mtry", config.mtry);
    num("max-depth", config.max_depth);
    num("min-leaf", config.min_leaf);
    num("vuln-threshold", config.vuln_threshold);
    num("minority-threshold", config.minority_threshold);
    num("poverty-threshold", config.poverty_threshold);
    num("threads", config.threads);
    num("boruta-max-iterations", config.boruta_max_iterations);
    num("boruta-p-threshold", config.boruta_p_threshold);
    num("boruta-trees", config.boruta_trees);
    if (doc.contains("diff")) config.diff = doc.at("diff").get<bool>();
    if (doc.contains("hard-vote")) config.hard_vote = doc.at("hard-vote").get<bool>();
    if (doc.contains("alpha-include-c19vi")) {
        config.alpha_include_c19vi = doc.at("alpha-include-c19vi").get<bool>();
    }
}

json config_to_json(const PipelineConfig& config) {
    json doc;
    auto put_path = [&](const char* key, const std::string& value) {
        if (!value.empty()) doc[key] = value;
    };
    put_path("cases", config.cases_path);
    put_path("deaths", config.deaths_path);
    put_path("themes", config.themes_path);
    put_path("census", config.census_path);
    put_path("ccvi", config.ccvi_path);
    put_path("boundaries", config.boundaries_path);
    put_path("impact", config.impact_path);
    put_path("model", config.model_path);
    put_path("manifest", config.manifest_path);
    put_path("scores", config.scores_path);
    put_path("overlay", config.overlay_path);
    put_path("index", config.index_path);
    put_path("out", config.out_path);
    put_path("out-dir", config.out_dir);
    put_path("model-out", config.model_out);
    put_path("manifest-out", config.manifest_out);
    if (config.end_date) doc["end-date"] = config.end_date->to_iso();
    doc["diff"] = config.diff;
    doc["alpha"] = config.alpha;
    doc["n-per-class"] = config.n_per_class;
    doc["train-frac"] = config.train_frac;
    doc["trees"] = config.n_trees;
    doc["mtry"] = config.mtry;
    doc["max-depth"] = config.max_depth;
    doc["min-leaf"] = config.min_leaf;
    if (config.seed) doc["seed"] = *config.seed;
    doc["vuln-threshold"] = config.vuln_threshold;
    doc["minority-threshold"] = config.minority_threshold;
    doc["poverty-threshold"] = config.poverty_threshold;
    doc["attribute"] = config.attribute;
    doc["fips-property"] = config.fips_property;
    doc["threads"] = config.threads;
    doc["hard-vote"] = config.hard_vote;
    doc["alpha-include-c19vi"] = config.alpha_include_c19vi;
    doc["index-cut"] = config.index_cut;
    doc["boruta-max-iterations"] = config.boruta_max_iterations;
    doc["boruta-p-threshold"] = config.boruta_p_threshold;
    doc["boruta-trees"] = config.boruta_trees;
    return doc;
}

void write_impact_csv(const std::string& path, const std::vector<impact::ImpactResult>& results) {
    CsvWriter w(path);
    w.write_row({"fips", "rank", "score", "driving_parameter", "ifr_rank", "ifr_score",
                 "deaths_rank", "deaths_score", "cases_rank", "cases_score"});
    for (const auto& r : results) {
        std::vector<std::string> row{
            r.fips, std::to_string(r.rank), format_double(r.score),
            r.driving_parameter ? impact::to_string(*r.driving_parameter) : "None"};
        for (const auto& a : r.assessments) {
            row.push_back(std::to_string(a.rank));
            row.push_back(format_double(a.score));
        }
        w.write_row(row);
    }
    w.close();
}

std::vector<impact::ImpactResult> load_impact_csv(const std::string& path) {
    CsvReader reader(path);
    CsvRow header;
    if (!reader.next(header) || header.fields.size() != 10 || header.fields[0] != "fips") {
        throw DataError(path + ": not an impact CSV");
    }
    std::vector<impact::ImpactResult> out;
    CsvRow row;
    while (reader.next(row)) {
        if (row.fields.size() != 10) {
            throw DataError(path + ":" + std::to_string(row.line_number) + ": expected 10 fields");
        }
        impact::ImpactResult r;
        r.fips = row.fields[0];
        auto ctx = path + ":" + std::to_string(row.line_number);
        r.rank = static_cast<int>(parse_integer(row.fields[1], ctx + " rank"));
        r.score = parse_double(row.fields[2], ctx + " score");
        if (row.fields[3] != "None") {
            for (auto p : {impact::Parameter::IFR, impact::Parameter::Deaths,
                           impact::Parameter::Cases}) {
                if (row.fields[3] == impact::to_string(p)) r.driving_parameter = p;
            }
            if (!r.driving_parameter) {
                throw DataError(ctx + ": unknown driving parameter '" + row.fields[3] + "'");
            }
        }
        for (std::size_t i = 0; i < 3; ++i) {
            r.assessments[i].parameter = static_cast<impact::Parameter>(i);
            r.assessments[i].rank =
                static_cast<int>(parse_integer(row.fields[4 + 2 * i], ctx + " rank"));
            r.assessments[i].score = parse_double(row.fields[5 + 2 * i], ctx + " score");
        }
        out.push_back(std::move(r));
    }
    return out;
}

void write_scores_csv(const std::string& path,
                      const std::vector<forest::VulnerabilityScore>& scores) {
    CsvWriter w(path);
    w.write_row({"fips", "c19vi", "class"});
    for (const auto& s : scores) {
        w.write_row({s.fips, format_double(s.c19vi), forest::to_string(s.cls)});
    }
    w.close();
}

std::vector<forest::VulnerabilityScore> load_scores_csv(const std::string& path) {
    CsvReader reader(path);
    CsvRow header;
    if (!reader.next(header) || header.fields.size() != 3 || header.fields[0] != "fips") {
        throw DataError(path + ": not a scores CSV");
    }
    std::vector<forest::VulnerabilityScore> out;
    CsvRow row;
    while (reader.next(row)) {
        if (row.fields.size() != 3) {
            throw DataError(path + ":" + std::to_string(row.line_number) + ": expected 3 fields");
        }
        forest::VulnerabilityScore s;
        s.fips = row.fields[0];
        s.c19vi = parse_double(row.fields[1], path + ":" + std::to_string(row.line_number));
        s.cls = forest::parse_class(row.fields[2]);
        out.push_back(std::move(s));
    }
    return out;
}

void write_training_manifest(const std::string& path, const impact::TrainingSet& set) {
    json rows = json::array();
    for (const auto& r : set.rows) {
        rows.push_back(json{{"fips", r.fips},
                            {"label", r.label},
                            {"split", r.in_train ? "train" : "test"}});
    }
    write_json_file(path, json{{"format_version", "c19vi-train-1"},
                               {"seed", set.seed},
                               {"rows", std::move(rows)}});
}

impact::TrainingSet load_training_manifest(const std::string& path) {
    json doc = read_json_file(path);
    try {
        if (doc.at("format_version").get<std::string>() != "c19vi-train-1") {
            throw DataError(path + ": unsupported training manifest version");
        }
        impact::TrainingSet set;
        set.seed = doc.at("seed").get<std::uint64_t>();
        for (const json& r : doc.at("rows")) {
            impact::TrainingRow row;
            row.fips = r.at("fips").get<std::string>();
            row.label = r.at("label").get<int>();
            row.in_train = r.at("split").get<std::string>() == "train";
            set.rows.push_back(std::move(row));
        }
        return set;
    } catch (const json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
}

void write_overlay_csv(const std::string& path,
                       const std::vector<overlay::OverlayRecord>& records) {
    CsvWriter w(path);
    w.write_row({"fips", "c19vi", "attribute", "attribute_pct", "quadrant"});
    for (const auto& r : records) {
        w.write_row({r.fips, format_double(r.c19vi), overlay::to_string(r.attribute),
                     format_double(r.attribute_pct), overlay::to_string(r.quadrant)});
    }
    w.close();
}

std::vector<overlay::OverlayRecord> load_overlay_csv(const std::string& path) {
    CsvReader reader(path);
    CsvRow header;
    if (!reader.next(header) || header.fields.size() != 5 || header.fields[0] != "fips") {
        throw DataError(path + ": not an overlay CSV");
    }
    std::vector<overlay::OverlayRecord> out;
    CsvRow row;
    while (reader.next(row)) {
        auto ctx = path + ":" + std::to_string(row.line_number);
        if (row.fields.size() != 5) throw DataError(ctx + ": expected 5 fields");
        overlay::OverlayRecord r;
        r.fips = row.fields[0];
        r.c19vi = parse_double(row.fields[1], ctx);
        r.attribute = overlay::parse_attribute(row.fields[2]);
        r.attribute_pct = parse_double(row.fields[3], ctx);
        bool known = false;
        for (auto q : {overlay::Quadrant::HighVulnHighAttr, overlay::Quadrant::LowVulnHighAttr,
                       overlay::Quadrant::HighVulnLowAttr, overlay::Quadrant::LowVulnLowAttr}) {
            if (row.fields[4] == overlay::to_string(q)) {
                r.quadrant = q;
                known = true;
            }
        }
        if (!known) throw DataError(ctx + ": unknown quadrant '" + row.fields[4] + "'");
        out.push_back(std::move(r));
    }
    return out;
}

void run_impact(const PipelineConfig& config, std::ostream& out) {
    print_effective_config(config, out);
    require(!config.out_path.empty(), "impact needs --out");
    ingest::LoadReport report;
    auto series = load_series_from(config, report);
    print_warnings(report.warnings, out);
    for (const auto& f : report.cases_only) {
        out << "note: FIPS " << f << " present only in the cases file\n";
    }
    for (const auto& f : report.deaths_only) {
        out << "note: FIPS " << f << " present only in the deaths file\n";
    }
    auto results = impact::assess_all(series, config.alpha, config.threads);
    write_impact_csv(config.out_path, results);
    print_histogram(results, out);
    out << "wrote " << config.out_path << "\n";
}

void run_train(const PipelineConfig& config, std::ostream& out) {
    print_effective_config(config, out);
    require(config.seed.has_value(), "train needs --seed");
    require(!config.themes_path.empty(), "train needs --themes");
    require(!config.model_out.empty(), "train needs --model-out");
    require(!config.manifest_out.empty(), "train needs --manifest-out");

    auto impacts = impacts_from(config, out);
    auto themes = ingest::load_themes(config.themes_path);
    std::vector<std::string> warnings;
    auto training = impact::select_training(impacts, themes, config.n_per_class,
                                            config.train_frac, *config.seed, &warnings);
    print_warnings(warnings, out);

    auto model = forest::train(training, forest_hp(config), config.threads);
    forest::save_model(model, config.model_out);
    write_training_manifest(config.manifest_out, training);
    std::size_t n_train = 0;
    for (const auto& r : training.rows) n_train += r.in_train;
    out << "selected " << training.rows.size() << " counties (" << n_train << " train / "
        << training.rows.size() - n_train << " test)\n";
    out << "wrote " << config.model_out << " and " << config.manifest_out << "\n";
}

void run_predict(const PipelineConfig& config, std::ostream& out) {
    print_effective_config(config, out);
    require(!config.model_path.empty(), "predict needs --model");
    require(!config.themes_path.empty(), "predict needs --themes");
    require(!config.out_path.empty(), "predict needs --out");

    auto model = forest::load_model(config.model_path);
    auto themes = ingest::load_themes(config.themes_path);
    std::vector<std::string> warnings;
    auto scores = predict_scores(model, themes, config.hard_vote, &warnings);
    print_warnings(warnings, out);
    write_scores_csv(config.out_path, scores);
    out << "scored " << scores.size() << " counties\n";
    out << "wrote " << config.out_path << "\n";
}

void run_validate(const PipelineConfig& config, std::ostream& out) {
    print_effective_config(config, out);
    require(!config.model_path.empty(), "validate needs --model");
    require(!config.manifest_path.empty(), "validate needs --manifest");
    require(!config.themes_path.empty(), "validate needs --themes");
    require(!config.alpha_include_c19vi || !config.scores_path.empty(),
            "--alpha-include-c19vi needs --scores");

    auto model = forest::load_model(config.model_path);
    auto manifest = load_training_manifest(config.manifest_path);
    auto themes = ingest::load_themes(config.themes_path);

    // Manifest rows carry no features; rejoin them against the theme file.
    auto by_fips = theme_map(themes);
    for (auto& row : manifest.rows) {
        auto it = by_fips.find(row.fips);
        if (it == by_fips.end()) {
            throw DataError("manifest county " + row.fips + " missing from " +
                            config.themes_path);
        }
        row.features = it->second;
    }

    std::vector<forest::VulnerabilityScore> scores;
    if (!config.scores_path.empty()) scores = load_scores_csv(config.scores_path);
    auto outcome = validate_model(model, manifest, themes,
                                  scores.empty() ? nullptr : &scores,
                                  config.alpha_include_c19vi, config.hard_vote);

    out << "validation\n"
        << "  train AUC      " << format_double(outcome.report.train_auc) << " (n="
        << outcome.report.n_train << ")\n"
        << "  test AUC       " << format_double(outcome.report.test_auc) << " (n="
        << outcome.report.n_test << ")\n"
        << "  Cronbach alpha " << format_double(outcome.report.cronbach_alpha)
        << (config.alpha_include_c19vi ? " (6 themes + C19VI)" : " (6 themes)") << "\n";
    if (!config.out_path.empty()) {
        write_json_file(config.out_path, outcome.to_json());
        out << "wrote " << config.out_path << "\n";
    }
}

void run_compare(const PipelineConfig& config, std::ostream& out) {
    print_effective_config(config, out);
    require(!config.scores_path.empty(), "compare needs --scores");
    require(!config.ccvi_path.empty(), "compare needs --ccvi");

    auto scores = load_scores_csv(config.scores_path);
    auto ccvi = ingest::load_index(config.ccvi_path);
    std::map<std::string, double> ccvi_by_fips;
    for (const auto& c : ccvi) ccvi_by_fips.emplace(c.fips, c.value);

    std::map<std::string, double> joined; // FIPS-sorted pairing
    for (const auto& s : scores) {
        if (ccvi_by_fips.count(s.fips)) joined.emplace(s.fips, s.c19vi);
    }
    if (joined.size() < 2) throw DataError("compare: fewer than 2 counties join");
    std::vector<double> ours, theirs;
    for (const auto& [fips, value] : joined) {
        ours.push_back(value);
        theirs.push_back(ccvi_by_fips.at(fips));
    }

    auto fr = evaluate::friedman(ours, theirs);
    auto wx = evaluate::wilcoxon_signed_rank(ours, theirs);
    evaluate::ComparisonReport report;
    report.friedman_chi2 = fr.chi2;
    report.friedman_df = fr.df;
    report.friedman_p = fr.p_value;
    report.mean_rank_a = fr.mean_rank_a;
    report.mean_rank_b = fr.mean_rank_b;
    report.wilcoxon_w = wx.w;
    report.wilcoxon_z = wx.z;
    report.wilcoxon_p = wx.p_value;
    report.wilcoxon_exact_p = wx.exact_p;
    report.n_pairs = wx.n_pairs;

    // 3.841 is the df=1 critical value at alpha 0.05, printed for context.
    out << "comparison (C19VI vs " << config.ccvi_path << ", " << joined.size()
        << " counties)\n"
        << "  Friedman chi2  " << format_double(fr.chi2) << " (df=1, critical 3.841 at 0.05), p "
        << format_double(fr.p_value) << "\n"
        << "  mean ranks     C19VI " << format_double(fr.mean_rank_a) << " / other "
        << format_double(fr.mean_rank_b) << "\n"
        << "  Wilcoxon       W " << format_double(wx.w) << ", z " << format_double(wx.z)
        << ", p " << format_double(wx.p_value) << " (" << wx.n_pairs << " nonzero pairs)\n";
    if (wx.exact_p) out << "  Wilcoxon exact p " << format_double(*wx.exact_p) << "\n";

    if (!config.out_path.empty()) {
        json doc{{"friedman_chi2", report.friedman_chi2},
                 {"friedman_df", report.friedman_df},
                 {"friedman_p", report.friedman_p},
                 {"mean_rank_c19vi", report.mean_rank_a},
                 {"mean_rank_other", report.mean_rank_b},
                 {"wilcoxon_w", report.wilcoxon_w},
                 {"wilcoxon_z", report.wilcoxon_z},
                 {"wilcoxon_p", report.wilcoxon_p},
                 {"n_pairs", report.n_pairs}};
        if (report.wilcoxon_exact_p) doc["wilcoxon_exact_p"] = *report.wilcoxon_exact_p;
        write_json_file(config.out_path, doc);
        out << "wrote " << config.out_path << "\n";
    }
}

void run_boruta(const PipelineConfig& config, std::ostream& out) {
    print_effective_config(config, out);
    require(!config.themes_path.empty(), "boruta needs --themes");
    require(!config.index_path.empty(), "boruta needs --index");
    require(config.seed.has_value(), "boruta needs --seed");

    auto themes = ingest::load_themes(config.themes_path);
    auto index = load_any_index(config.index_path);
    std::map<std::string, double> index_by_fips;
    for (const auto& i : index) index_by_fips.emplace(i.fips, i.value);

    std::vector<std::vector<double>> rows;
    std::vector<double> values;
    for (const auto& t : themes) {
        auto it = index_by_fips.find(t.fips);
        if (it == index_by_fips.end()) continue;
        rows.emplace_back(t.t.begin(), t.t.end());
        values.push_back(it->second);
    }
    if (rows.size() < 4) throw DataError("boruta: fewer than 4 counties join the index");

    // Classification labels from the index column: above/below the cut.
    double cut;
    if (config.index_cut == "median") {
        std::vector<double> sorted = values;
        std::sort(sorted.begin(), sorted.end());
        std::size_t m = sorted.size();
        cut = m % 2 == 1 ? sorted[m / 2] : (sorted[m / 2 - 1] + sorted[m / 2]) / 2.0;
    } else {
        cut = parse_double(config.index_cut, "--index-cut");
    }
    std::vector<int> labels;
    labels.reserve(values.size());
    for (double v : values) labels.push_back(v > cut ? 1 : 0);

    evaluate::BorutaConfig bc;
    bc.max_iterations = config.boruta_max_iterations;
    bc.p_threshold = config.boruta_p_threshold;
    bc.seed = *config.seed;
    bc.n_trees = config.boruta_trees;
    bc.threads = config.threads;
    std::vector<std::string> warnings;
    auto report = evaluate::boruta(rows, labels, {"t1", "t2", "t3", "t4", "t5", "t6"}, bc,
                                   &warnings);
    print_warnings(warnings, out);

    out << "boruta (" << rows.size() << " counties, cut " << format_double(cut) << ", "
        << report.iterations_run << " iterations)\n";
    for (const auto& f : report.features) {
        out << "  " << f.name << "  mean Z " << format_double(f.mean_importance) << "  hits "
            << f.hits << "/" << report.iterations_run << "  " << to_string(f.decision) << "\n";
    }
    if (!config.out_path.empty()) {
        json features = json::array();
        for (const auto& f : report.features) {
            features.push_back(json{{"name", f.name},
                                    {"mean_importance", f.mean_importance},
                                    {"hits", f.hits},
                                    {"decision", to_string(f.decision)}});
        }
        write_json_file(config.out_path,
                        json{{"iterations_run", report.iterations_run},
                             {"index_cut", cut},
                             {"features", std::move(features)}});
        out << "wrote " << config.out_path << "\n";
    }
}

namespace {

struct OverlayOutcome {
    overlay::Attribute attribute;
    std::vector<overlay::OverlayRecord> records;
    double share = 0.0;
};

OverlayOutcome overlay_one(const PipelineConfig& config,
                           const std::vector<forest::VulnerabilityScore>& scores,
                           const std::vector<ingest::CensusRecord>& census,
                           overlay::Attribute attribute, std::ostream& out) {
    OverlayOutcome outcome;
    outcome.attribute = attribute;
    double attr_threshold = attribute == overlay::Attribute::Minority
                                ? config.minority_threshold
                                : config.poverty_threshold;
    overlay::JoinReport join;
    outcome.records = overlay::overlay(scores, census, attribute, config.vuln_threshold,
                                       attr_threshold, &join);
    for (const auto& f : join.scores_only) {
        out << "note: FIPS " << f << " has a score but no census record\n";
    }
    for (const auto& f : join.census_only) {
        out << "note: FIPS " << f << " has a census record but no score\n";
    }
    outcome.share = overlay::disproportionality(outcome.records);
    out << "  " << overlay::to_string(attribute) << " > "
        << format_double(attr_threshold) << ": " << format_double(100.0 * outcome.share)
        << "% of high-attribute counties have C19VI > "
        << format_double(config.vuln_threshold) << "\n";
    return outcome;
}

} // namespace

void run_overlay(const PipelineConfig& config, std::ostream& out) {
    print_effective_config(config, out);
    require(!config.scores_path.empty(), "overlay needs --scores");
    require(!config.census_path.empty(), "overlay needs --census");
    require(!config.out_path.empty(), "overlay needs --out (prefix for the per-attribute CSVs)");

    auto scores = load_scores_csv(config.scores_path);
    auto census = ingest::load_census(config.census_path);

    std::vector<overlay::Attribute> attributes;
    if (config.attribute == "both") {
        attributes = {overlay::Attribute::Minority, overlay::Attribute::Poverty};
    } else {
        attributes = {overlay::parse_attribute(config.attribute)};
    }
    out << "overlay of " << scores.size() << " scores x " << census.size()
        << " census records\n";
    for (auto attribute : attributes) {
        auto outcome = overlay_one(config, scores, census, attribute, out);
        std::string path = config.out_path + "_" +
                           (attribute == overlay::Attribute::Minority ? "minority" : "poverty") +
                           ".csv";
        write_overlay_csv(path, outcome.records);
        out << "wrote " << path << "\n";
    }
}

void run_geojson(const PipelineConfig& config, std::ostream& out) {
    print_effective_config(config, out);
    require(!config.scores_path.empty(), "geojson needs --scores");
    require(!config.boundaries_path.empty(), "geojson needs --boundaries");
    require(!config.out_path.empty(), "geojson needs --out");

    auto scores = load_scores_csv(config.scores_path);
    std::vector<impact::ImpactResult> impacts;
    if (!config.impact_path.empty()) impacts = load_impact_csv(config.impact_path);
    std::vector<overlay::OverlayRecord> records;
    if (!config.overlay_path.empty()) records = load_overlay_csv(config.overlay_path);

    auto properties = overlay::build_properties(scores, impacts.empty() ? nullptr : &impacts,
                                                records.empty() ? nullptr : &records);
    json boundaries = read_json_file(config.boundaries_path);
    json enriched = overlay::join_geojson(boundaries, config.fips_property, properties);
    write_json_file(config.out_path, enriched);
    out << "wrote " << config.out_path << " (" << enriched.at("features").size()
        << " features)\n";
}

void run_pipeline(const PipelineConfig& config, std::ostream& out) {
    print_effective_config(config, out);
    require(config.seed.has_value(), "pipeline needs --seed");
    require(!config.out_dir.empty(), "pipeline needs --out-dir");
    require(!config.cases_path.empty() && !config.deaths_path.empty(),
            "pipeline needs --cases and --deaths");
    require(!config.themes_path.empty(), "pipeline needs --themes");
    require(!config.census_path.empty(), "pipeline needs --census");

    std::string started = iso_timestamp_now();
    fs::create_directories(config.out_dir);
    auto path_in = [&](const std::string& name) { return (fs::path(config.out_dir) / name).string(); };

    json inputs;
    for (const std::string& p : {config.cases_path, config.deaths_path, config.themes_path,
                                 config.census_path, config.ccvi_path, config.boundaries_path}) {
        if (!p.empty()) inputs[p] = fingerprint(p);
    }

    std::vector<std::string> outputs;
    std::string stage = "ingest";
    try {
        ingest::LoadReport load_report;
        auto series = load_series_from(config, load_report);
        print_warnings(load_report.warnings, out);

        stage = "impact";
        auto impacts = impact::assess_all(series, config.alpha, config.threads);
        write_impact_csv(path_in("impact.csv"), impacts);
        outputs.push_back(path_in("impact.csv"));
        print_histogram(impacts, out);

        stage = "train";
        auto themes = ingest::load_themes(config.themes_path);
        std::vector<std::string> warnings;
        auto training = impact::select_training(impacts, themes, config.n_per_class,
                                                config.train_frac, *config.seed, &warnings);
        print_warnings(warnings, out);
        auto model = forest::train(training, forest_hp(config), config.threads);
        forest::save_model(model, path_in("model.json"));
        write_training_manifest(path_in("training_manifest.json"), training);
        outputs.push_back(path_in("model.json"));
        outputs.push_back(path_in("training_manifest.json"));

        stage = "predict";
        auto scores = predict_scores(model, themes, config.hard_vote, &warnings);
        write_scores_csv(path_in("scores.csv"), scores);
        outputs.push_back(path_in("scores.csv"));
        std::map<forest::VulnClass, std::size_t> class_counts;
        for (const auto& s : scores) ++class_counts[s.cls];
        out << "C19VI classes:";
        for (auto c : {forest::VulnClass::VeryLow, forest::VulnClass::Low,
                       forest::VulnClass::Moderate, forest::VulnClass::High,
                       forest::VulnClass::VeryHigh}) {
            out << " " << forest::to_string(c) << "=" << class_counts[c];
        }
        out << "\n";

        stage = "validate";
        auto outcome = validate_model(model, training, themes, &scores,
                                      config.alpha_include_c19vi, config.hard_vote);
        write_json_file(path_in("validation.json"), outcome.to_json());
        outputs.push_back(path_in("validation.json"));
        out << "train AUC " << format_double(outcome.report.train_auc) << ", test AUC "
            << format_double(outcome.report.test_auc) << ", Cronbach alpha "
            << format_double(outcome.report.cronbach_alpha) << "\n";

        if (!config.ccvi_path.empty()) {
            stage = "compare";
            PipelineConfig sub = config;
            sub.scores_path = path_in("scores.csv");
            sub.out_path = path_in("comparison.json");
            std::ostringstream quiet;
            run_compare(sub, quiet);
            // re-emit without the nested config block
            std::istringstream lines(quiet.str());
            std::string line;
            bool past_config = false;
            while (std::getline(lines, line)) {
                if (past_config) out << line << "\n";
                if (line == "}") past_config = true;
            }
            outputs.push_back(path_in("comparison.json"));
        }

        stage = "overlay";
        auto census = ingest::load_census(config.census_path);
        for (auto attribute : {overlay::Attribute::Minority, overlay::Attribute::Poverty}) {
            auto one = overlay_one(config, scores, census, attribute, out);
            std::string path = path_in(std::string("overlay_") +
                                       (attribute == overlay::Attribute::Minority ? "minority"
                                                                                  : "poverty") +
                                       ".csv");
            write_overlay_csv(path, one.records);
            outputs.push_back(path);
        }

        if (!config.boundaries_path.empty()) {
            stage = "geojson";
            auto properties = overlay::build_properties(scores, &impacts, nullptr);
            json boundaries = read_json_file(config.boundaries_path);
            json enriched = overlay::join_geojson(boundaries, config.fips_property, properties);
            write_json_file(path_in("c19vi.geojson"), enriched);
            outputs.push_back(path_in("c19vi.geojson"));
        }
    } catch (const DataError& e) {
        throw DataError("pipeline stage '" + stage + "': " + e.what());
    }

    json digests;
    for (const auto& p : outputs) digests[fs::path(p).filename().string()] = fingerprint(p);
    json manifest{{"tool", "c19vi"},
                  {"version", kToolVersion},
                  {"command", "pipeline"},
                  {"inputs", inputs},
                  {"parameters", config_to_json(config)},
                  {"outputs", digests},
                  {"started_at", started},
                  {"finished_at", iso_timestamp_now()}};
    write_json_file(path_in("run_manifest.json"), manifest);
    out << "wrote " << path_in("run_manifest.json") << "\n";
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"County pandemic-impact scoring and vulnerability-index pipeline"};
    app.set_version_flag("--version", std::string("c19vi ") + kToolVersion);

    PipelineConfig config;
    // Apply --config before binding flags so flags override file values.
    for (int i = 1; i < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            if (i + 1 >= argc) {
                err << "error: --config needs a path\n";
                return 1;
            }
            try {
                apply_config_file(config, argv[i + 1]);
            } catch (const DataError& e) {
                err << "error: " << e.what() << "\n";
                return 2;
            }
        }
    }
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file; flags override its values");

    std::string end_date_text, seed_text;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--alpha", config.alpha, "significance level for the trend tests");
        cmd->add_option("--threads", config.threads, "worker cap (1 reproduces any N)");
        cmd->add_option("--seed", seed_text, "master seed for all randomized stages");
    };

    auto* impact_cmd = app.add_subcommand("impact", "rank county pandemic impact");
    impact_cmd->add_option("--cases", config.cases_path, "cases CSV (JHU-wide or long)");
    impact_cmd->add_option("--deaths", config.deaths_path, "deaths CSV");
    impact_cmd->add_option("--end-date", end_date_text, "truncate series after this ISO date");
    impact_cmd->add_flag("--diff", config.diff, "convert cumulative counts to daily increments");
    impact_cmd->add_option("--out", config.out_path, "impact CSV to write");
    add_common(impact_cmd);

    auto* train_cmd = app.add_subcommand("train", "select extremes and train the forest");
    train_cmd->add_option("--impact", config.impact_path, "precomputed impact CSV");
    train_cmd->add_option("--cases", config.cases_path, "cases CSV (if no --impact)");
    train_cmd->add_option("--deaths", config.deaths_path, "deaths CSV (if no --impact)");
    train_cmd->add_option("--end-date", end_date_text, "truncate series after this ISO date");
    train_cmd->add_flag("--diff", config.diff, "convert cumulative counts to daily increments");
    train_cmd->add_option("--themes", config.themes_path, "themes CSV");
    train_cmd->add_option("--n-per-class", config.n_per_class, "extreme counties per class");
    train_cmd->add_option("--train-frac", config.train_frac, "training fraction of each class");
    train_cmd->add_option("--trees", config.n_trees, "number of trees");
    train_cmd->add_option("--mtry", config.mtry, "features tried per split");
    train_cmd->add_option("--max-depth", config.max_depth, "max depth, 0 = unlimited");
    train_cmd->add_option("--min-leaf", config.min_leaf, "minimum samples per leaf");
    train_cmd->add_option("--model-out", config.model_out, "model file to write");
    train_cmd->add_option("--manifest-out", config.manifest_out, "training manifest to write");
    add_common(train_cmd);

    auto* predict_cmd = app.add_subcommand("predict", "score every county with themes");
    predict_cmd->add_option("--model", config.model_path, "trained model file");
    predict_cmd->add_option("--themes", config.themes_path, "themes CSV");
    predict_cmd->add_flag("--hard-vote", config.hard_vote, "majority vote instead of soft");
    predict_cmd->add_option("--out", config.out_path, "scores CSV to write");
    add_common(predict_cmd);

    auto* validate_cmd = app.add_subcommand("validate", "train/test AUC and Cronbach alpha");
    validate_cmd->add_option("--model", config.model_path, "trained model file");
    validate_cmd->add_option("--manifest", config.manifest_path, "training manifest");
    validate_cmd->add_option("--themes", config.themes_path, "themes CSV");
    validate_cmd->add_option("--scores", config.scores_path, "scores CSV (for the alpha switch)");
    validate_cmd->add_flag("--alpha-include-c19vi", config.alpha_include_c19vi,
                           "include the C19VI column as a seventh alpha item");
    validate_cmd->add_flag("--hard-vote", config.hard_vote, "majority vote instead of soft");
    validate_cmd->add_option("--out", config.out_path, "report JSON to write");
    add_common(validate_cmd);

    auto* compare_cmd = app.add_subcommand("compare", "Friedman + Wilcoxon against another index");
    compare_cmd->add_option("--scores", config.scores_path, "scores CSV");
    compare_cmd->add_option("--ccvi", config.ccvi_path, "comparison index CSV (fips,value)");
    compare_cmd->add_option("--out", config.out_path, "report JSON to write");
    add_common(compare_cmd);

    auto* boruta_cmd = app.add_subcommand("boruta", "shadow-feature importance of the themes");
    boruta_cmd->add_option("--themes", config.themes_path, "themes CSV");
    boruta_cmd->add_option("--index", config.index_path,
                           "index CSV (fips,value) or scores CSV to explain");
    boruta_cmd->add_option("--index-cut", config.index_cut,
                           "label cut: 'median' or a numeric threshold");
    boruta_cmd->add_option("--max-iterations", config.boruta_max_iterations, "iteration cap");
    boruta_cmd->add_option("--p-threshold", config.boruta_p_threshold, "decision p threshold");
    boruta_cmd->add_option("--trees", config.boruta_trees, "trees per iteration forest");
    boruta_cmd->add_option("--out", config.out_path, "report JSON to write");
    add_common(boruta_cmd);

    auto* overlay_cmd = app.add_subcommand("overlay", "census threshold quadrants");
    overlay_cmd->add_option("--scores", config.scores_path, "scores CSV");
    overlay_cmd->add_option("--census", config.census_path, "census CSV");
    overlay_cmd->add_option("--attribute", config.attribute, "minority, poverty, or both");
    overlay_cmd->add_option("--vuln-threshold", config.vuln_threshold, "high-vulnerability cut");
    overlay_cmd->add_option("--minority-threshold", config.minority_threshold, "minority cut");
    overlay_cmd->add_option("--poverty-threshold", config.poverty_threshold, "poverty cut");
    overlay_cmd->add_option("--out", config.out_path, "prefix for overlay_<attribute>.csv");
    add_common(overlay_cmd);

    auto* geojson_cmd = app.add_subcommand("geojson", "attach scores to boundary features");
    geojson_cmd->add_option("--scores", config.scores_path, "scores CSV");
    geojson_cmd->add_option("--impact", config.impact_path, "impact CSV (optional)");
    geojson_cmd->add_option("--overlay", config.overlay_path, "overlay CSV (optional)");
    geojson_cmd->add_option("--boundaries", config.boundaries_path, "GeoJSON FeatureCollection");
    geojson_cmd->add_option("--fips-property", config.fips_property,
                            "feature property holding the county FIPS");
    geojson_cmd->add_option("--out", config.out_path, "enriched GeoJSON to write");
    add_common(geojson_cmd);

    auto* pipeline_cmd = app.add_subcommand("pipeline", "impact>train>predict>validate>overlay");
    pipeline_cmd->add_option("--cases", config.cases_path, "cases CSV");
    pipeline_cmd->add_option("--deaths", config.deaths_path, "deaths CSV");
    pipeline_cmd->add_option("--themes", config.themes_path, "themes CSV");
    pipeline_cmd->add_option("--census", config.census_path, "census CSV");
    pipeline_cmd->add_option("--ccvi", config.ccvi_path, "comparison index CSV (optional)");
    pipeline_cmd->add_option("--boundaries", config.boundaries_path, "GeoJSON (optional)");
    pipeline_cmd->add_option("--fips-property", config.fips_property,
                             "feature property holding the county FIPS");
    pipeline_cmd->add_option("--end-date", end_date_text, "truncate series after this ISO date");
    pipeline_cmd->add_flag("--diff", config.diff, "convert cumulative counts to increments");
    pipeline_cmd->add_option("--n-per-class", config.n_per_class, "extreme counties per class");
    pipeline_cmd->add_option("--train-frac", config.train_frac, "training fraction per class");
    pipeline_cmd->add_option("--trees", config.n_trees, "number of trees");
    pipeline_cmd->add_option("--mtry", config.mtry, "features tried per split");
    pipeline_cmd->add_option("--max-depth", config.max_depth, "max depth, 0 = unlimited");
    pipeline_cmd->add_option("--min-leaf", config.min_leaf, "minimum samples per leaf");
    pipeline_cmd->add_flag("--hard-vote", config.hard_vote, "majority vote instead of soft");
    pipeline_cmd->add_option("--vuln-threshold", config.vuln_threshold, "high-vulnerability cut");
    pipeline_cmd->add_option("--minority-threshold", config.minority_threshold, "minority cut");
    pipeline_cmd->add_option("--poverty-threshold", config.poverty_threshold, "poverty cut");
    pipeline_cmd->add_option("--out-dir", config.out_dir, "directory for all artifacts");
    add_common(pipeline_cmd);

    app.require_subcommand(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) { // --help / --version
            out << app.help();
            return 0;
        }
        err << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (!end_date_text.empty()) config.end_date = Date::parse_iso(end_date_text);
        if (!seed_text.empty()) {
            config.seed = static_cast<std::uint64_t>(
                parse_integer(seed_text, "--seed"));
        }
        if (impact_cmd->parsed()) run_impact(config, out);
        else if (train_cmd->parsed()) run_train(config, out);
        else if (predict_cmd->parsed()) run_predict(config, out);
        else if (validate_cmd->parsed()) run_validate(config, out);
        else if (compare_cmd->parsed()) run_compare(config, out);
        else if (boruta_cmd->parsed()) run_boruta(config, out);
        else if (overlay_cmd->parsed()) run_overlay(config, out);
        else if (geojson_cmd->parsed()) run_geojson(config, out);
        else if (pipeline_cmd->parsed()) run_pipeline(config, out);
        return 0;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return 3;
    }
}

} // namespace c19vi::cli
