#pragma once

#include "c19vi/date.hpp"
#include "c19vi/evaluate.hpp"
#include "c19vi/forest.hpp"
#include "c19vi/impact.hpp"
#include "c19vi/overlay.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace c19vi::cli {

inline constexpr const char* kToolVersion = "1.0.0";

// One config surface shared by every subcommand; flags override config-file
// values field by field. Environment variables are never consulted.
struct PipelineConfig {
    // input paths
    std::string cases_path;
    std::string deaths_path;
    std::string themes_path;
    std::string census_path;
    std::string ccvi_path;
    std::string boundaries_path;
    std::string impact_path; // precomputed impact CSV (alternative to cases+deaths)
    std::string model_path;
    std::string manifest_path;
    std::string scores_path;
    std::string overlay_path;
    std::string index_path;

    // output paths
    std::string out_path;
    std::string out_dir;
    std::string model_out;
    std::string manifest_out;

    // parameters
    std::optional<Date> end_date;
    bool diff = false;
    double alpha = 0.05;
    std::size_t n_per_class = 200;
    double train_frac = 0.70;
    int n_trees = 500;
    int mtry = 2;
    int max_depth = 0;
    int min_leaf = 1;
    std::optional<std::uint64_t> seed;
    double vuln_threshold = overlay::kDefaultVulnThreshold;
    double minority_threshold = overlay::kDefaultMinorityThreshold;
    double poverty_threshold = overlay::kDefaultPovertyThreshold;
    std::string attribute = "both"; // minority | poverty | both
    std::string fips_property = "FIPS";
    int threads = 1;
    bool hard_vote = false;
    bool alpha_include_c19vi = false;
    std::string index_cut = "median"; // median | numeric threshold
    int boruta_max_iterations = 100;
    double boruta_p_threshold = 0.01;
    int boruta_trees = 100;
};

// Applies a JSON config document (keys named after the long CLI flags).
void apply_config_file(PipelineConfig& config, const std::string& path);

nlohmann::json config_to_json(const PipelineConfig& config);

// Subcommand bodies. Each prints the effective config block to `out`, writes
// its artifacts, and throws DataError/UsageError on failure.
void run_impact(const PipelineConfig& config, std::ostream& out);
void run_train(const PipelineConfig& config, std::ostream& out);
void run_predict(const PipelineConfig& config, std::ostream& out);
void run_validate(const PipelineConfig& config, std::ostream& out);
void run_compare(const PipelineConfig& config, std::ostream& out);
void run_boruta(const PipelineConfig& config, std::ostream& out);
void run_overlay(const PipelineConfig& config, std::ostream& out);
void run_geojson(const PipelineConfig& config, std::ostream& out);
void run_pipeline(const PipelineConfig& config, std::ostream& out);

// Artifact readers/writers shared by the subcommands and tests.
void write_impact_csv(const std::string& path, const std::vector<impact::ImpactResult>& results);
std::vector<impact::ImpactResult> load_impact_csv(const std::string& path);

void write_scores_csv(const std::string& path,
                      const std::vector<forest::VulnerabilityScore>& scores);
std::vector<forest::VulnerabilityScore> load_scores_csv(const std::string& path);

void write_training_manifest(const std::string& path, const impact::TrainingSet& set);
impact::TrainingSet load_training_manifest(const std::string& path);

void write_overlay_csv(const std::string& path, const std::vector<overlay::OverlayRecord>& records);
std::vector<overlay::OverlayRecord> load_overlay_csv(const std::string& path);

// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace c19vi::cli
