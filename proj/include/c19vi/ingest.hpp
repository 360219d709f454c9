#pragma once

#include "c19vi/date.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace c19vi::ingest {

// One county's daily epidemic series. Counts are cumulative by default; the
// diff switch converts them to daily increments at load time.
struct CountySeries {
    std::string fips; // 5-character zero-padded
    std::string name;
    Date start_date;
    std::vector<double> cases;
    std::vector<double> deaths;
    std::vector<double> ifr; // deaths[t]/cases[t] when cases[t] > 0, else 0
    int monotonicity_violations = 0;
};

// Six CDC theme percentile scores, ordered theme 1..6.
struct ThemeVector {
    std::string fips;
    std::array<double, 6> t{};
};

struct CensusRecord {
    std::string fips;
    double population = 0.0;
    double minority_pct = 0.0; // fraction in [0,1]
    double poverty_pct = 0.0;  // fraction in [0,1]
};

// An externally produced index column (e.g. CCVI) for comparison.
struct IndexColumn {
    std::string fips;
    double value = 0.0;
};

// Non-fatal findings collected while loading.
struct LoadReport {
    std::vector<std::string> cases_only;  // FIPS present only in the cases file
    std::vector<std::string> deaths_only; // FIPS present only in the deaths file
    std::vector<std::string> warnings;    // dropped rows, monotonicity notes
};

// Normalizes a FIPS cell: accepts "1001", "01001", "1001.0"; returns the
// zero-padded 5-character code or nullopt when non-numeric / out of range.
std::optional<std::string> normalize_fips(const std::string& raw);

// Loads a cases/deaths file pair. Both files must share a format: JHU-wide
// (a FIPS column plus M/D/YY date columns) or long (fips,date,cases,deaths).
// One CountySeries per FIPS present in both files; counties in only one file
// land in the report. `diff` converts cumulative counts to daily increments
// before the IFR is derived.
std::vector<CountySeries> load_series(const std::string& cases_path,
                                      const std::string& deaths_path,
                                      std::optional<Date> end_date, bool diff,
                                      LoadReport* report = nullptr);

// Writes series in the long format `fips,date,cases,deaths` (lossless for
// reloading; the per-county name is not carried by the long format).
void write_series_long(const std::vector<CountySeries>& series, const std::string& path);

std::vector<ThemeVector> load_themes(const std::string& path, LoadReport* report = nullptr);
std::vector<CensusRecord> load_census(const std::string& path, LoadReport* report = nullptr);
std::vector<IndexColumn> load_index(const std::string& path, LoadReport* report = nullptr);

} // namespace c19vi::ingest
