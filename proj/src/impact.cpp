#include "c19vi/impact.hpp"

#include "c19vi/errors.hpp"
#include "c19vi/parallel.hpp"
#include "c19vi/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace c19vi::impact {

using tstats::Direction;

const char* to_string(Parameter p) {
    switch (p) {
    case Parameter::IFR: return "IFR";
    case Parameter::Deaths: return "Deaths";
    case Parameter::Cases: return "Cases";
    }
    return "IFR";
}

namespace {

// Base ranks realize the parameter priority: the numeric minimum of
// {1, 2, 4} picks IFR over deaths over cases.
int base_rank(Parameter p) {
    switch (p) {
    case Parameter::IFR: return 1;
    case Parameter::Deaths: return 2;
    case Parameter::Cases: return 4;
    }
    return 1;
}

int flat_post_rank(Parameter p) {
    return p == Parameter::Cases ? 5 : 3;
}

} // namespace

RankDecision decide_rank(Parameter parameter, bool homogeneous, Direction overall,
                         std::optional<Direction> pre, std::optional<Direction> post) {
    if (homogeneous) {
        if (overall == Direction::Increasing) {
            return {base_rank(parameter), ScoreSource::Overall};
        }
        return {};
    }
    if (pre && *pre == Direction::Increasing && post) {
        switch (*post) {
        case Direction::Increasing: return {base_rank(parameter), ScoreSource::Post};
        case Direction::NoTrend: return {flat_post_rank(parameter), ScoreSource::Pre};
        case Direction::Decreasing: return {5, ScoreSource::NegatedPost};
        }
    }
    return {};
}

ParameterAssessment assess_parameter(std::span<const double> trimmed, Parameter parameter,
                                     double alpha) {
    ParameterAssessment a;
    a.parameter = parameter;
    if (trimmed.empty()) {
        return a; // the county never reported this quantity
    }

    a.homogeneity = tstats::pettitt(trimmed, alpha);
    a.overall = tstats::mann_kendall(trimmed, alpha);
    if (!a.homogeneity.homogeneous) {
        std::size_t tau = a.homogeneity.changepoint;
        a.pre = tstats::mann_kendall(trimmed.subspan(0, tau), alpha);
        a.post = tstats::mann_kendall(trimmed.subspan(tau), alpha);
    }

    auto dir = [](const std::optional<tstats::TrendResult>& t) -> std::optional<Direction> {
        if (!t) return std::nullopt;
        return t->direction;
    };
    RankDecision d = decide_rank(parameter, a.homogeneity.homogeneous, a.overall.direction,
                                 dir(a.pre), dir(a.post));
    a.rank = d.rank;
    switch (d.source) {
    case ScoreSource::Overall: a.score = a.overall.slope; break;
    case ScoreSource::Post: a.score = a.post->slope; break;
    case ScoreSource::Pre: a.score = a.pre->slope; break;
    case ScoreSource::NegatedPost:
        // negative of the post trend magnitude; the only negative score source
        a.score = -std::fabs(a.post->slope);
        break;
    case ScoreSource::None: a.score = kNonSignificantScore; break;
    }
    return a;
}

void combine_assessments(ImpactResult& result) {
    result.rank = kNonSignificantRank;
    result.score = kNonSignificantScore;
    result.driving_parameter.reset();
    for (const ParameterAssessment& a : result.assessments) {
        if (!is_significant_rank(a.rank)) continue;
        if (!result.driving_parameter || a.rank < result.rank) {
            result.rank = a.rank;
            result.score = a.score;
            result.driving_parameter = a.parameter;
        }
    }
}

namespace {

std::span<const double> trim_leading_zeros(std::span<const double> series) {
    std::size_t nzi = 0;
    while (nzi < series.size() && series[nzi] == 0.0) ++nzi;
    return series.subspan(nzi);
}

} // namespace

ImpactResult assess_county(const ingest::CountySeries& county, double alpha) {
    ImpactResult r;
    r.fips = county.fips;
    r.assessments[0] = assess_parameter(trim_leading_zeros(county.ifr), Parameter::IFR, alpha);
    r.assessments[1] =
        assess_parameter(trim_leading_zeros(county.deaths), Parameter::Deaths, alpha);
    r.assessments[2] = assess_parameter(trim_leading_zeros(county.cases), Parameter::Cases, alpha);
    combine_assessments(r);
    return r;
}

std::vector<ImpactResult> assess_all(std::span<const ingest::CountySeries> counties, double alpha,
                                     int threads) {
    std::vector<ImpactResult> out(counties.size());
    parallel_for(counties.size(), threads,
                 [&](std::size_t i) { out[i] = assess_county(counties[i], alpha); });
    return out;
}

TrainingSet select_training(const std::vector<ImpactResult>& impacts,
                            const std::vector<ingest::ThemeVector>& themes,
                            std::size_t n_per_class, double train_frac, std::uint64_t seed,
                            std::vector<std::string>* warnings) {
    if (train_frac <= 0.0 || train_frac > 1.0) {
        throw DataError("train_frac must lie in (0,1]");
    }
    std::map<std::string, const ingest::ThemeVector*> theme_by_fips;
    for (const auto& t : themes) theme_by_fips.emplace(t.fips, &t);

    auto note = [&](const std::string& msg) {
        if (warnings) warnings->push_back(msg);
    };

    std::vector<const ImpactResult*> vulnerable;
    std::vector<const ImpactResult*> unaffected;
    for (const ImpactResult& r : impacts) {
        if (r.rank != 1 && is_significant_rank(r.rank)) continue;
        if (!theme_by_fips.count(r.fips)) {
            note("county " + r.fips + " skipped: no theme scores");
            continue;
        }
        (r.rank == 1 ? vulnerable : unaffected).push_back(&r);
    }
    if (vulnerable.empty() || unaffected.empty()) {
        throw DataError("training selection needs at least one rank-1 and one non-significant "
                        "county with theme scores (have " +
                        std::to_string(vulnerable.size()) + " and " +
                        std::to_string(unaffected.size()) + ")");
    }

    std::size_t take = std::min({n_per_class, vulnerable.size(), unaffected.size()});
    if (take < n_per_class) {
        note("only " + std::to_string(take) + " counties per class available (requested " +
             std::to_string(n_per_class) + "); balancing both classes down");
    }

    // Most impacted first; FIPS breaks score ties so the pick is reproducible.
    std::sort(vulnerable.begin(), vulnerable.end(), [](const ImpactResult* a, const ImpactResult* b) {
        if (a->score != b->score) return a->score > b->score;
        return a->fips < b->fips;
    });
    vulnerable.resize(take);

    // The non-significant class has no usable ordering (all share the
    // sentinel); a seeded uniform sample over the FIPS-sorted pool keeps the
    // draw independent of input order.
    std::sort(unaffected.begin(), unaffected.end(),
              [](const ImpactResult* a, const ImpactResult* b) { return a->fips < b->fips; });
    Rng selection_rng(derive_seed(seed, Stream::Selection));
    std::vector<std::size_t> picks = selection_rng.sample_without_replacement(unaffected.size(), take);
    std::sort(picks.begin(), picks.end());

    TrainingSet set;
    set.seed = seed;
    auto add_rows = [&](const std::vector<const ImpactResult*>& group, int label) {
        std::size_t first = set.rows.size();
        for (const ImpactResult* r : group) {
            TrainingRow row;
            row.fips = r->fips;
            row.features = theme_by_fips.at(r->fips)->t;
            row.label = label;
            set.rows.push_back(std::move(row));
        }
        // Stratified split: shuffle this label's block, mark the first
        // train_frac of it as training rows.
        std::vector<std::size_t> idx(set.rows.size() - first);
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = first + i;
        Rng split_rng(derive_seed(seed, Stream::Split, static_cast<std::uint64_t>(label)));
        split_rng.shuffle(idx);
        auto n_train =
            static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(idx.size())));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            set.rows[idx[i]].in_train = i < n_train;
        }
    };
    add_rows(vulnerable, 1);
    std::vector<const ImpactResult*> sampled;
    sampled.reserve(take);
    for (std::size_t p : picks) sampled.push_back(unaffected[p]);
    add_rows(sampled, 0);
    return set;
}

} // namespace c19vi::impact
