#include "c19vi/overlay.hpp"

#include "c19vi/errors.hpp"

#include <map>

namespace c19vi::overlay {

const char* to_string(Attribute a) {
    return a == Attribute::Minority ? "Minority" : "Poverty";
}

Attribute parse_attribute(const std::string& text) {
    if (text == "Minority" || text == "minority") return Attribute::Minority;
    if (text == "Poverty" || text == "poverty") return Attribute::Poverty;
    throw DataError("unknown attribute '" + text + "' (expected minority or poverty)");
}

double default_attribute_threshold(Attribute a) {
    return a == Attribute::Minority ? kDefaultMinorityThreshold : kDefaultPovertyThreshold;
}

const char* to_string(Quadrant q) {
    switch (q) {
    case Quadrant::HighVulnHighAttr: return "HighVulnHighAttr";
    case Quadrant::LowVulnHighAttr: return "LowVulnHighAttr";
    case Quadrant::HighVulnLowAttr: return "HighVulnLowAttr";
    case Quadrant::LowVulnLowAttr: return "LowVulnLowAttr";
    }
    return "LowVulnLowAttr";
}

Quadrant classify_quadrant(double c19vi, double attribute_pct, double vuln_threshold,
                           double attr_threshold) {
    bool high_vuln = c19vi > vuln_threshold;
    bool high_attr = attribute_pct > attr_threshold;
    if (high_vuln) return high_attr ? Quadrant::HighVulnHighAttr : Quadrant::HighVulnLowAttr;
    return high_attr ? Quadrant::LowVulnHighAttr : Quadrant::LowVulnLowAttr;
}

std::vector<OverlayRecord> overlay(const std::vector<forest::VulnerabilityScore>& scores,
                                   const std::vector<ingest::CensusRecord>& census,
                                   Attribute attribute, double vuln_threshold,
                                   double attr_threshold, JoinReport* report) {
    if (attr_threshold < 0.0) attr_threshold = default_attribute_threshold(attribute);

    std::map<std::string, const ingest::CensusRecord*> census_by_fips;
    for (const auto& c : census) census_by_fips.emplace(c.fips, &c);
    std::map<std::string, bool> census_matched;
    for (const auto& c : census) census_matched[c.fips] = false;

    std::vector<OverlayRecord> out;
    for (const auto& s : scores) {
        auto it = census_by_fips.find(s.fips);
        if (it == census_by_fips.end()) {
            if (report) report->scores_only.push_back(s.fips);
            continue;
        }
        census_matched[s.fips] = true;
        OverlayRecord r;
        r.fips = s.fips;
        r.c19vi = s.c19vi;
        r.attribute = attribute;
        r.attribute_pct = attribute == Attribute::Minority ? it->second->minority_pct
                                                           : it->second->poverty_pct;
        r.quadrant = classify_quadrant(r.c19vi, r.attribute_pct, vuln_threshold, attr_threshold);
        out.push_back(std::move(r));
    }
    if (report) {
        for (const auto& [fips, matched] : census_matched) {
            if (!matched) report->census_only.push_back(fips);
        }
    }
    return out;
}

double disproportionality(const std::vector<OverlayRecord>& records) {
    long long high_attr = 0, high_both = 0;
    for (const auto& r : records) {
        if (r.quadrant == Quadrant::HighVulnHighAttr) {
            ++high_both;
            ++high_attr;
        } else if (r.quadrant == Quadrant::LowVulnHighAttr) {
            ++high_attr;
        }
    }
    if (high_attr == 0) {
        throw DataError("disproportionality: no county exceeds the attribute threshold");
    }
    return static_cast<double>(high_both) / static_cast<double>(high_attr);
}

PropertyMap build_properties(const std::vector<forest::VulnerabilityScore>& scores,
                             const std::vector<impact::ImpactResult>* impacts,
                             const std::vector<OverlayRecord>* records) {
    PropertyMap map;
    for (const auto& s : scores) {
        nlohmann::json& props = map[s.fips];
        props["c19vi"] = s.c19vi;
        props["c19vi_class"] = forest::to_string(s.cls);
    }
    if (impacts) {
        for (const auto& r : *impacts) {
            nlohmann::json& props = map[r.fips];
            props["impact_rank"] = r.rank;
            props["impact_score"] = r.score;
        }
    }
    if (records) {
        for (const auto& r : *records) {
            nlohmann::json& props = map[r.fips];
            std::string key = r.attribute == Attribute::Minority ? "minority" : "poverty";
            props[key + "_pct"] = r.attribute_pct;
            props[key + "_quadrant"] = to_string(r.quadrant);
        }
    }
    return map;
}

nlohmann::json join_geojson(const nlohmann::json& boundaries, const std::string& fips_property,
                            const PropertyMap& properties) {
    if (!boundaries.is_object() || boundaries.value("type", "") != "FeatureCollection" ||
        !boundaries.contains("features") || !boundaries.at("features").is_array()) {
        throw DataError("boundaries document is not a GeoJSON FeatureCollection");
    }
    nlohmann::json out = boundaries;
    for (nlohmann::json& feature : out.at("features")) {
        if (!feature.is_object() || !feature.contains("properties") ||
            !feature.at("properties").is_object()) {
            throw DataError("GeoJSON feature without a properties object");
        }
        nlohmann::json& props = feature.at("properties");
        if (!props.contains(fips_property)) {
            throw DataError("GeoJSON feature missing FIPS property '" + fips_property + "'");
        }
        const nlohmann::json& raw = props.at(fips_property);
        std::string fips_text =
            raw.is_string() ? raw.get<std::string>()
                            : (raw.is_number() ? std::to_string(raw.get<long long>()) : "");
        auto fips = ingest::normalize_fips(fips_text);
        auto it = fips ? properties.find(*fips) : properties.end();
        if (it == properties.end()) {
            props["c19vi_nodata"] = true;
            continue;
        }
        for (const auto& [key, value] : it->second.items()) {
            props[key] = value;
        }
    }
    return out;
}

} // namespace c19vi::overlay
