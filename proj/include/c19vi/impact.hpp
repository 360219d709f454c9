#pragma once

#include "c19vi/ingest.hpp"
#include "c19vi/tstats.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace c19vi::impact {

enum class Parameter { IFR, Deaths, Cases };

const char* to_string(Parameter p);

// Sentinel coding kept for output fidelity: rank -999 / score -999 mark a
// county (or parameter) without a significant epidemic signal.
inline constexpr int kNonSignificantRank = -999;
inline constexpr double kNonSignificantScore = -999.0;

inline bool is_significant_rank(int rank) {
    return rank != kNonSignificantRank;
}

struct ParameterAssessment {
    Parameter parameter = Parameter::IFR;
    tstats::ChangePointResult homogeneity;
    tstats::TrendResult overall;
    std::optional<tstats::TrendResult> pre;  // [nzi, tau-1] of the trimmed series
    std::optional<tstats::TrendResult> post; // [tau, end]
    int rank = kNonSignificantRank;
    double score = kNonSignificantScore;
};

struct ImpactResult {
    std::string fips;
    int rank = kNonSignificantRank;
    double score = kNonSignificantScore;
    std::optional<Parameter> driving_parameter;
    std::array<ParameterAssessment, 3> assessments; // IFR, Deaths, Cases order
};

// Decision table mapping test outcomes to (rank, score source). Exposed so the
// branch logic can be exhausted independently of series construction.
enum class ScoreSource { Overall, Post, Pre, NegatedPost, None };

struct RankDecision {
    int rank = kNonSignificantRank;
    ScoreSource source = ScoreSource::None;
};

RankDecision decide_rank(Parameter parameter, bool homogeneous, tstats::Direction overall,
                         std::optional<tstats::Direction> pre,
                         std::optional<tstats::Direction> post);

// Assesses one already-trimmed series (leading zeros removed). An empty
// trimmed series means the county never reported the quantity.
ParameterAssessment assess_parameter(std::span<const double> trimmed, Parameter parameter,
                                     double alpha);

// Combines the three parameter assessments: minimum numeric rank, the sentinel
// participating only when all three carry it; ties resolve by the parameter
// priority IFR > Deaths > Cases.
void combine_assessments(ImpactResult& result);

// Trims each of the county's three series at its own first nonzero index and
// assesses them.
ImpactResult assess_county(const ingest::CountySeries& county, double alpha);

std::vector<ImpactResult> assess_all(std::span<const ingest::CountySeries> counties, double alpha,
                                     int threads = 1);

// Training data selected from the impact extremes.
struct TrainingRow {
    std::string fips;
    std::array<double, 6> features{};
    int label = 0; // 1 = vulnerable (rank 1), 0 = not (non-significant)
    bool in_train = true;
};

struct TrainingSet {
    std::vector<TrainingRow> rows;
    std::uint64_t seed = 0;
};

// Label-1 rows: rank-1 counties by score descending (FIPS ascending on ties),
// top n_per_class. Label-0 rows: seeded uniform sample of non-significant
// counties. Classes are balanced down to the smaller side when short, with a
// warning. The split is stratified per label at train_frac.
TrainingSet select_training(const std::vector<ImpactResult>& impacts,
                            const std::vector<ingest::ThemeVector>& themes,
                            std::size_t n_per_class, double train_frac, std::uint64_t seed,
                            std::vector<std::string>* warnings = nullptr);

} // namespace c19vi::impact
