#include "c19vi/ingest.hpp"

#include "c19vi/csv.hpp"
#include "c19vi/errors.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

namespace c19vi::ingest {

namespace {

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::string at(const std::string& path, std::size_t line) {
    return path + ":" + std::to_string(line);
}

void warn(LoadReport* report, const std::string& msg) {
    if (report) report->warnings.push_back(msg);
}

// One file's worth of per-county series, still un-merged.
struct RawTable {
    std::vector<std::string> order; // FIPS in file order
    std::map<std::string, std::vector<double>> values;
    std::map<std::string, Date> starts;
    std::map<std::string, std::string> names;
};

bool header_is_long(const std::vector<std::string>& header) {
    return header.size() == 4 && lower(trim(header[0])) == "fips" &&
           lower(trim(header[1])) == "date" && lower(trim(header[2])) == "cases" &&
           lower(trim(header[3])) == "deaths";
}

int find_column(const std::vector<std::string>& header, const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (lower(trim(header[i])) == name) return static_cast<int>(i);
    }
    return -1;
}

RawTable load_wide(const std::string& path, const std::vector<std::string>& header,
                   CsvReader& reader, LoadReport* report) {
    RawTable table;
    int fips_col = find_column(header, "fips");
    int name_col = find_column(header, "admin2");
    if (name_col < 0) name_col = find_column(header, "combined_key");

    std::vector<std::pair<std::size_t, Date>> date_cols;
    for (std::size_t i = 0; i < header.size(); ++i) {
        Date d;
        if (header[i].find('/') != std::string::npos && Date::try_parse(trim(header[i]), d)) {
            date_cols.emplace_back(i, d);
        }
    }
    if (date_cols.empty()) {
        throw DataError(path + ": malformed header: no M/D/YY date columns found");
    }
    for (std::size_t i = 1; i < date_cols.size(); ++i) {
        if (date_cols[i - 1].second.days_until(date_cols[i].second) != 1) {
            throw DataError(path + ": date columns not consecutive between " +
                            date_cols[i - 1].second.to_iso() + " and " +
                            date_cols[i].second.to_iso());
        }
    }
    const Date file_start = date_cols.front().second;

    CsvRow row;
    while (reader.next(row)) {
        if (row.fields.size() != header.size()) {
            throw DataError(at(path, row.line_number) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(row.fields.size()));
        }
        auto fips = normalize_fips(row.fields[static_cast<std::size_t>(fips_col)]);
        if (!fips) {
            warn(report, path + ": dropped row with unusable FIPS '" +
                             row.fields[static_cast<std::size_t>(fips_col)] + "' (line " +
                             std::to_string(row.line_number) + ")");
            continue;
        }
        if (table.values.count(*fips)) {
            throw DataError(at(path, row.line_number) + ": duplicate FIPS " + *fips);
        }
        std::vector<double> series;
        series.reserve(date_cols.size());
        for (const auto& [col, date] : date_cols) {
            series.push_back(
                parse_double(trim(row.fields[col]), at(path, row.line_number) + " column " +
                                                        std::to_string(col + 1)));
        }
        table.order.push_back(*fips);
        table.values.emplace(*fips, std::move(series));
        table.starts.emplace(*fips, file_start);
        if (name_col >= 0) {
            table.names[*fips] = row.fields[static_cast<std::size_t>(name_col)];
        }
    }
    return table;
}

// Returns per-FIPS (cases, deaths) pairs; the caller splits them apart.
struct LongTable {
    RawTable cases;
    RawTable deaths;
};

LongTable load_long(const std::string& path, CsvReader& reader, LoadReport* report) {
    struct DayRow {
        double cases;
        double deaths;
    };
    std::map<std::string, std::map<Date, DayRow>> by_county;
    std::vector<std::string> order;

    CsvRow row;
    while (reader.next(row)) {
        if (row.fields.size() != 4) {
            throw DataError(at(path, row.line_number) + ": expected 4 fields, got " +
                            std::to_string(row.fields.size()));
        }
        auto fips = normalize_fips(row.fields[0]);
        if (!fips) {
            warn(report, path + ": dropped row with unusable FIPS '" + row.fields[0] +
                             "' (line " + std::to_string(row.line_number) + ")");
            continue;
        }
        Date d = Date::parse_iso(trim(row.fields[1]));
        double cases = parse_double(trim(row.fields[2]), at(path, row.line_number) + " cases");
        double deaths = parse_double(trim(row.fields[3]), at(path, row.line_number) + " deaths");
        auto [it, fresh] = by_county.try_emplace(*fips);
        if (fresh) order.push_back(*fips);
        if (!it->second.emplace(d, DayRow{cases, deaths}).second) {
            throw DataError(at(path, row.line_number) + ": duplicate FIPS " + *fips +
                            " for date " + d.to_iso());
        }
    }

    LongTable out;
    for (const std::string& fips : order) {
        const auto& days = by_county[fips];
        Date prev;
        bool first = true;
        std::vector<double> cases, deaths;
        for (const auto& [date, v] : days) {
            if (!first && prev.days_until(date) != 1) {
                throw DataError(path + ": dates for FIPS " + fips + " not consecutive between " +
                                prev.to_iso() + " and " + date.to_iso());
            }
            first = false;
            prev = date;
            cases.push_back(v.cases);
            deaths.push_back(v.deaths);
        }
        Date start = days.begin()->first;
        out.cases.order.push_back(fips);
        out.deaths.order.push_back(fips);
        out.cases.values.emplace(fips, std::move(cases));
        out.deaths.values.emplace(fips, std::move(deaths));
        out.cases.starts.emplace(fips, start);
        out.deaths.starts.emplace(fips, start);
    }
    return out;
}

int count_monotonicity_violations(const std::vector<double>& v) {
    int count = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] < v[i - 1]) ++count;
    }
    return count;
}

std::vector<double> to_increments(const std::vector<double>& cumulative) {
    std::vector<double> out(cumulative.size());
    for (std::size_t i = 0; i < cumulative.size(); ++i) {
        out[i] = i == 0 ? cumulative[0] : cumulative[i] - cumulative[i - 1];
    }
    return out;
}

} // namespace

std::optional<std::string> normalize_fips(const std::string& raw) {
    std::string s = trim(raw);
    // JHU exports sometimes carry a float-formatted code like "1001.0".
    std::size_t dot = s.find('.');
    if (dot != std::string::npos) {
        for (std::size_t i = dot + 1; i < s.size(); ++i) {
            if (s[i] != '0') return std::nullopt;
        }
        s = s.substr(0, dot);
    }
    if (s.empty() || s.size() > 5) return std::nullopt;
    long value = 0;
    for (char c : s) {
        if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
        value = value * 10 + (c - '0');
    }
    if (value < 1 || value > 99999) return std::nullopt;
    std::string padded = std::to_string(value);
    return std::string(5 - padded.size(), '0') + padded;
}

std::vector<CountySeries> load_series(const std::string& cases_path,
                                      const std::string& deaths_path,
                                      std::optional<Date> end_date, bool diff,
                                      LoadReport* report) {
    auto load_one = [&](const std::string& path, bool want_deaths) -> RawTable {
        CsvReader reader(path);
        CsvRow header;
        if (!reader.next(header)) {
            throw DataError(path + ": malformed header: file is empty");
        }
        if (header_is_long(header.fields)) {
            LongTable t = load_long(path, reader, report);
            return want_deaths ? std::move(t.deaths) : std::move(t.cases);
        }
        if (find_column(header.fields, "fips") < 0) {
            throw DataError(path + ": malformed header: no FIPS column");
        }
        return load_wide(path, header.fields, reader, report);
    };

    RawTable cases = load_one(cases_path, false);
    RawTable deaths = load_one(deaths_path, true);

    std::set<std::string> deaths_fips;
    for (const auto& [fips, v] : deaths.values) deaths_fips.insert(fips);

    std::vector<CountySeries> out;
    for (const std::string& fips : cases.order) {
        if (!deaths_fips.count(fips)) {
            if (report) report->cases_only.push_back(fips);
            continue;
        }
        const auto& c_all = cases.values[fips];
        const auto& d_all = deaths.values[fips];

        // Align the two files on their overlapping date range for this county.
        long shift = cases.starts.at(fips).days_until(deaths.starts.at(fips));
        if (shift != 0) {
            warn(report, "FIPS " + fips + ": cases and deaths start on different dates (" +
                             cases.starts.at(fips).to_iso() + " vs " +
                             deaths.starts.at(fips).to_iso() + "); using the overlap");
        }
        long c_off = std::max(0L, shift);
        long d_off = std::max(0L, -shift);
        long len = std::min<long>(static_cast<long>(c_all.size()) - c_off,
                                  static_cast<long>(d_all.size()) - d_off);
        Date start = cases.starts.at(fips).plus_days(c_off);
        if (end_date) {
            long keep = start.days_until(*end_date) + 1;
            len = std::min(len, keep);
        }
        if (len < 1) {
            throw DataError("FIPS " + fips + ": no overlapping days between the two files" +
                            (end_date ? " before " + end_date->to_iso() : ""));
        }

        CountySeries s;
        s.fips = fips;
        auto name_it = cases.names.find(fips);
        if (name_it != cases.names.end()) s.name = name_it->second;
        s.start_date = start;
        s.cases.assign(c_all.begin() + c_off, c_all.begin() + c_off + len);
        s.deaths.assign(d_all.begin() + d_off, d_all.begin() + d_off + len);
        s.monotonicity_violations =
            count_monotonicity_violations(s.cases) + count_monotonicity_violations(s.deaths);
        if (diff) {
            s.cases = to_increments(s.cases);
            s.deaths = to_increments(s.deaths);
        }
        s.ifr.resize(s.cases.size());
        for (std::size_t t = 0; t < s.cases.size(); ++t) {
            s.ifr[t] = s.cases[t] > 0 ? s.deaths[t] / s.cases[t] : 0.0;
        }
        out.push_back(std::move(s));
    }
    if (report) {
        std::set<std::string> cases_fips;
        for (const auto& [fips, v] : cases.values) cases_fips.insert(fips);
        for (const std::string& fips : deaths.order) {
            if (!cases_fips.count(fips)) report->deaths_only.push_back(fips);
        }
    }
    return out;
}

void write_series_long(const std::vector<CountySeries>& series, const std::string& path) {
    CsvWriter w(path);
    w.write_row({"fips", "date", "cases", "deaths"});
    for (const CountySeries& s : series) {
        for (std::size_t t = 0; t < s.cases.size(); ++t) {
            w.write_row({s.fips, s.start_date.plus_days(static_cast<long>(t)).to_iso(),
                         format_double(s.cases[t]), format_double(s.deaths[t])});
        }
    }
    w.close();
}

namespace {

// Shared shape of the three small keyed CSVs.
template <typename Record, typename ParseFields>
std::vector<Record> load_keyed_csv(const std::string& path,
                                   const std::vector<std::string>& expected_header,
                                   LoadReport* report, ParseFields&& parse) {
    CsvReader reader(path);
    CsvRow header;
    if (!reader.next(header)) {
        throw DataError(path + ": malformed header: file is empty");
    }
    for (std::size_t i = 0; i < expected_header.size(); ++i) {
        if (i >= header.fields.size() || lower(trim(header.fields[i])) != expected_header[i]) {
            throw DataError(path + ": missing column '" + expected_header[i] + "'" +
                            (i < header.fields.size() ? " (got '" + header.fields[i] + "')"
                                                      : ""));
        }
    }
    if (header.fields.size() != expected_header.size()) {
        throw DataError(path + ": malformed header: expected " +
                        std::to_string(expected_header.size()) + " columns");
    }
    std::vector<Record> out;
    std::set<std::string> seen;
    CsvRow row;
    while (reader.next(row)) {
        if (row.fields.size() != expected_header.size()) {
            throw DataError(at(path, row.line_number) + ": expected " +
                            std::to_string(expected_header.size()) + " fields, got " +
                            std::to_string(row.fields.size()));
        }
        auto fips = normalize_fips(row.fields[0]);
        if (!fips) {
            warn(report, path + ": dropped row with unusable FIPS '" + row.fields[0] +
                             "' (line " + std::to_string(row.line_number) + ")");
            continue;
        }
        if (!seen.insert(*fips).second) {
            throw DataError(at(path, row.line_number) + ": duplicate FIPS " + *fips);
        }
        out.push_back(parse(*fips, row));
    }
    return out;
}

double parse_unit_fraction(const std::string& text, const std::string& context,
                           const std::string& fips, const std::string& column) {
    double v = parse_double(text, context);
    if (v < 0.0 || v > 1.0) {
        std::string hint =
            v > 1.0 && v <= 100.0 ? " (value looks like a percent; expected a fraction in [0,1])"
                                  : "";
        throw DataError(context + ": FIPS " + fips + " column " + column + " = " + text +
                        " outside [0,1]" + hint);
    }
    return v;
}

} // namespace

std::vector<ThemeVector> load_themes(const std::string& path, LoadReport* report) {
    return load_keyed_csv<ThemeVector>(
        path, {"fips", "t1", "t2", "t3", "t4", "t5", "t6"}, report,
        [&](const std::string& fips, const CsvRow& row) {
            ThemeVector v;
            v.fips = fips;
            for (std::size_t i = 0; i < 6; ++i) {
                std::string col = "t" + std::to_string(i + 1);
                v.t[i] = parse_unit_fraction(trim(row.fields[i + 1]),
                                             at(path, row.line_number), fips, col);
            }
            return v;
        });
}

std::vector<CensusRecord> load_census(const std::string& path, LoadReport* report) {
    return load_keyed_csv<CensusRecord>(
        path, {"fips", "population", "minority_pct", "poverty_pct"}, report,
        [&](const std::string& fips, const CsvRow& row) {
            CensusRecord r;
            r.fips = fips;
            r.population =
                parse_double(trim(row.fields[1]), at(path, row.line_number) + " population");
            if (!(r.population > 0)) {
                throw DataError(at(path, row.line_number) + ": FIPS " + fips +
                                " population must be > 0");
            }
            r.minority_pct = parse_unit_fraction(trim(row.fields[2]), at(path, row.line_number),
                                                 fips, "minority_pct");
            r.poverty_pct = parse_unit_fraction(trim(row.fields[3]), at(path, row.line_number),
                                                fips, "poverty_pct");
            return r;
        });
}

std::vector<IndexColumn> load_index(const std::string& path, LoadReport* report) {
    return load_keyed_csv<IndexColumn>(
        path, {"fips", "value"}, report, [&](const std::string& fips, const CsvRow& row) {
            IndexColumn c;
            c.fips = fips;
            c.value =
                parse_unit_fraction(trim(row.fields[1]), at(path, row.line_number), fips, "value");
            return c;
        });
}

} // namespace c19vi::ingest
