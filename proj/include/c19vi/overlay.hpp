#pragma once

#include "c19vi/forest.hpp"
#include "c19vi/impact.hpp"
#include "c19vi/ingest.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace c19vi::overlay {

enum class Attribute { Minority, Poverty };

const char* to_string(Attribute a);
Attribute parse_attribute(const std::string& text);

inline constexpr double kDefaultVulnThreshold = 0.6;
inline constexpr double kDefaultMinorityThreshold = 0.13;
inline constexpr double kDefaultPovertyThreshold = 0.20;

double default_attribute_threshold(Attribute a);

enum class Quadrant { HighVulnHighAttr, LowVulnHighAttr, HighVulnLowAttr, LowVulnLowAttr };

const char* to_string(Quadrant q);

struct OverlayRecord {
    std::string fips;
    double c19vi = 0.0;
    double attribute_pct = 0.0;
    Attribute attribute = Attribute::Minority;
    Quadrant quadrant = Quadrant::LowVulnLowAttr;
};

// Counties dropped from a FIPS join because they appear on only one side.
struct JoinReport {
    std::vector<std::string> scores_only;
    std::vector<std::string> census_only;
};

// Strict thresholds: boundary values fall on the Low side of both axes.
Quadrant classify_quadrant(double c19vi, double attribute_pct, double vuln_threshold,
                           double attr_threshold);

std::vector<OverlayRecord> overlay(const std::vector<forest::VulnerabilityScore>& scores,
                                   const std::vector<ingest::CensusRecord>& census,
                                   Attribute attribute,
                                   double vuln_threshold = kDefaultVulnThreshold,
                                   double attr_threshold = -1.0, // <0: attribute default
                                   JoinReport* report = nullptr);

// Share of high-attribute counties that are highly vulnerable:
// |HighVulnHighAttr| / (|HighVulnHighAttr| + |LowVulnHighAttr|).
double disproportionality(const std::vector<OverlayRecord>& records);

// Per-FIPS property bag merged into matching GeoJSON features. Unmatched
// features keep their properties and gain {"c19vi_nodata": true}.
using PropertyMap = std::map<std::string, nlohmann::json>;

PropertyMap build_properties(const std::vector<forest::VulnerabilityScore>& scores,
                             const std::vector<impact::ImpactResult>* impacts,
                             const std::vector<OverlayRecord>* records);

nlohmann::json join_geojson(const nlohmann::json& boundaries, const std::string& fips_property,
                            const PropertyMap& properties);

} // namespace c19vi::overlay
