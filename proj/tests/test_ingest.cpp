#include "c19vi/ingest.hpp"

#include "c19vi/errors.hpp"
#include "temp_files.hpp"

#include <doctest.h>

#include <string>
#include <vector>

using namespace c19vi;
using ingest::LoadReport;

namespace {

// Wide pair: one county, five days.
const char* kCasesWide =
    "UID,FIPS,Admin2,Lat,1/22/20,1/23/20,1/24/20,1/25/20,1/26/20\n"
    "84001001,1001,\"Autauga, County\",32.5,1,2,3,4,5\n";
const char* kDeathsWide =
    "UID,FIPS,Admin2,Lat,Population,1/22/20,1/23/20,1/24/20,1/25/20,1/26/20\n"
    "84001001,1001,\"Autauga, County\",32.5,55869,0,0,1,1,1\n";

} // namespace

TEST_CASE("load_series derives the IFR with the zero guard") {
    TempDir dir;
    auto cases = write_file(dir.file("cases.csv"), kCasesWide);
    auto deaths = write_file(dir.file("deaths.csv"), kDeathsWide);

    auto series = ingest::load_series(cases, deaths, std::nullopt, false);
    REQUIRE(series.size() == 1);
    const auto& s = series[0];
    CHECK(s.fips == "01001");
    CHECK(s.name == "Autauga, County");
    CHECK(s.start_date.to_iso() == "2020-01-22");
    CHECK(s.cases == std::vector<double>{1, 2, 3, 4, 5});
    CHECK(s.deaths == std::vector<double>{0, 0, 1, 1, 1});
    CHECK(s.ifr == std::vector<double>{0.0, 0.0, 1.0 / 3.0, 1.0 / 4.0, 1.0 / 5.0});
    CHECK(s.monotonicity_violations == 0);
}

TEST_CASE("ifr times cases reproduces deaths wherever cases are positive") {
    TempDir dir;
    auto cases = write_file(dir.file("cases.csv"), kCasesWide);
    auto deaths = write_file(dir.file("deaths.csv"), kDeathsWide);
    auto series = ingest::load_series(cases, deaths, std::nullopt, false);
    for (const auto& s : series) {
        for (std::size_t t = 0; t < s.cases.size(); ++t) {
            if (s.cases[t] > 0) {
                CHECK(s.ifr[t] == s.deaths[t] / s.cases[t]);
            } else {
                CHECK(s.ifr[t] == 0.0);
            }
        }
    }
}

TEST_CASE("counties missing from one file are reported, not dropped silently") {
    TempDir dir;
    auto cases = write_file(dir.file("cases.csv"),
                            "FIPS,1/22/20,1/23/20,1/24/20\n"
                            "1003,5,6,7\n");
    auto deaths = write_file(dir.file("deaths.csv"),
                             "FIPS,1/22/20,1/23/20,1/24/20\n"
                             "1001,0,0,1\n"
                             "1003,0,1,1\n");
    LoadReport report;
    auto series = ingest::load_series(cases, deaths, std::nullopt, false, &report);
    REQUIRE(series.size() == 1);
    CHECK(series[0].fips == "01003");
    REQUIRE(report.deaths_only.size() == 1);
    CHECK(report.deaths_only[0] == "01001");
    CHECK(report.cases_only.empty());
}

TEST_CASE("wide loader rejects structural problems") {
    TempDir dir;
    auto good_deaths = write_file(dir.file("deaths.csv"),
                                  "FIPS,1/22/20,1/23/20\n"
                                  "1001,0,0\n");
    SUBCASE("no date columns") {
        auto bad = write_file(dir.file("cases.csv"), "FIPS,a,b\n1001,1,2\n");
        CHECK_THROWS_AS(ingest::load_series(bad, good_deaths, std::nullopt, false), DataError);
    }
    SUBCASE("non-consecutive dates") {
        auto bad = write_file(dir.file("cases.csv"), "FIPS,1/22/20,1/24/20\n1001,1,2\n");
        CHECK_THROWS_WITH_AS(ingest::load_series(bad, good_deaths, std::nullopt, false),
                             doctest::Contains("not consecutive"), DataError);
    }
    SUBCASE("non-numeric cell") {
        auto bad = write_file(dir.file("cases.csv"), "FIPS,1/22/20,1/23/20\n1001,1,x\n");
        CHECK_THROWS_AS(ingest::load_series(bad, good_deaths, std::nullopt, false), DataError);
    }
    SUBCASE("duplicate FIPS") {
        auto bad = write_file(dir.file("cases.csv"),
                              "FIPS,1/22/20,1/23/20\n1001,1,2\n01001,1,2\n");
        CHECK_THROWS_WITH_AS(ingest::load_series(bad, good_deaths, std::nullopt, false),
                             doctest::Contains("duplicate FIPS"), DataError);
    }
    SUBCASE("missing file names the path") {
        CHECK_THROWS_WITH_AS(
            ingest::load_series(dir.file("absent.csv"), good_deaths, std::nullopt, false),
            doctest::Contains("absent.csv"), DataError);
    }
}

TEST_CASE("unusable FIPS rows are dropped with a warning") {
    TempDir dir;
    auto cases = write_file(dir.file("cases.csv"),
                            "FIPS,1/22/20\n"
                            ",3\n"
                            "abc,4\n"
                            "1001.0,5\n");
    auto deaths = write_file(dir.file("deaths.csv"), "FIPS,1/22/20\n1001,1\n");
    LoadReport report;
    auto series = ingest::load_series(cases, deaths, std::nullopt, false, &report);
    REQUIRE(series.size() == 1);
    CHECK(series[0].fips == "01001"); // "1001.0" normalized
    CHECK(report.warnings.size() == 2);
}

TEST_CASE("end_date truncation and diff mode") {
    TempDir dir;
    auto cases = write_file(dir.file("cases.csv"),
                            "FIPS,1/22/20,1/23/20,1/24/20,1/25/20\n"
                            "1001,1,3,6,10\n");
    auto deaths = write_file(dir.file("deaths.csv"),
                             "FIPS,1/22/20,1/23/20,1/24/20,1/25/20\n"
                             "1001,0,1,2,2\n");
    SUBCASE("truncate") {
        auto series = ingest::load_series(cases, deaths, Date(2020, 1, 23), false);
        REQUIRE(series.size() == 1);
        CHECK(series[0].cases == std::vector<double>{1, 3});
    }
    SUBCASE("diff") {
        auto series = ingest::load_series(cases, deaths, std::nullopt, true);
        REQUIRE(series.size() == 1);
        CHECK(series[0].cases == std::vector<double>{1, 2, 3, 4});
        CHECK(series[0].deaths == std::vector<double>{0, 1, 1, 0});
        CHECK(series[0].ifr[2] == 1.0 / 3.0);
    }
}

TEST_CASE("negative corrections are kept and counted") {
    TempDir dir;
    auto cases = write_file(dir.file("cases.csv"),
                            "FIPS,1/22/20,1/23/20,1/24/20,1/25/20\n"
                            "1001,5,4,6,3\n");
    auto deaths = write_file(dir.file("deaths.csv"),
                             "FIPS,1/22/20,1/23/20,1/24/20,1/25/20\n"
                             "1001,0,0,0,0\n");
    auto series = ingest::load_series(cases, deaths, std::nullopt, false);
    REQUIRE(series.size() == 1);
    CHECK(series[0].monotonicity_violations == 2);
    CHECK(series[0].cases == std::vector<double>{5, 4, 6, 3});
}

TEST_CASE("long format round-trips exactly") {
    TempDir dir;
    auto cases = write_file(dir.file("cases.csv"), kCasesWide);
    auto deaths = write_file(dir.file("deaths.csv"), kDeathsWide);
    auto series = ingest::load_series(cases, deaths, std::nullopt, false);

    auto long_path = dir.file("long.csv");
    ingest::write_series_long(series, long_path);
    auto reloaded = ingest::load_series(long_path, long_path, std::nullopt, false);
    REQUIRE(reloaded.size() == series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        CHECK(reloaded[i].fips == series[i].fips);
        CHECK(reloaded[i].start_date == series[i].start_date);
        CHECK(reloaded[i].cases == series[i].cases);
        CHECK(reloaded[i].deaths == series[i].deaths);
        CHECK(reloaded[i].ifr == series[i].ifr);
    }
}

TEST_CASE("long format rejects duplicates and gaps") {
    TempDir dir;
    SUBCASE("duplicate county-date") {
        auto bad = write_file(dir.file("long.csv"),
                              "fips,date,cases,deaths\n"
                              "1001,2020-01-22,1,0\n"
                              "1001,2020-01-22,2,0\n");
        CHECK_THROWS_WITH_AS(ingest::load_series(bad, bad, std::nullopt, false),
                             doctest::Contains("duplicate"), DataError);
    }
    SUBCASE("gap in dates") {
        auto bad = write_file(dir.file("long.csv"),
                              "fips,date,cases,deaths\n"
                              "1001,2020-01-22,1,0\n"
                              "1001,2020-01-24,2,0\n");
        CHECK_THROWS_WITH_AS(ingest::load_series(bad, bad, std::nullopt, false),
                             doctest::Contains("not consecutive"), DataError);
    }
}

TEST_CASE("load_themes validates the unit range") {
    TempDir dir;
    SUBCASE("valid row") {
        auto p = write_file(dir.file("themes.csv"),
                            "fips,t1,t2,t3,t4,t5,t6\n01001,0.5,0.5,0.5,0.5,0.5,0.5\n");
        auto themes = ingest::load_themes(p);
        REQUIRE(themes.size() == 1);
        for (double t : themes[0].t) CHECK(t == 0.5);
    }
    SUBCASE("out-of-range value names the county and column") {
        auto p = write_file(dir.file("themes.csv"),
                            "fips,t1,t2,t3,t4,t5,t6\n01001,0.5,0.5,1.2,0.5,0.5,0.5\n");
        CHECK_THROWS_WITH_AS(ingest::load_themes(p), doctest::Contains("01001"), DataError);
        try {
            ingest::load_themes(p);
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find("t3") != std::string::npos);
        }
    }
    SUBCASE("header only is an empty collection") {
        auto p = write_file(dir.file("themes.csv"), "fips,t1,t2,t3,t4,t5,t6\n");
        CHECK(ingest::load_themes(p).empty());
    }
    SUBCASE("missing column") {
        auto p = write_file(dir.file("themes.csv"), "fips,t1,t2,t3,t4,t5\n");
        CHECK_THROWS_WITH_AS(ingest::load_themes(p), doctest::Contains("missing column"),
                             DataError);
    }
    SUBCASE("duplicate FIPS") {
        auto p = write_file(dir.file("themes.csv"),
                            "fips,t1,t2,t3,t4,t5,t6\n"
                            "01001,0.5,0.5,0.5,0.5,0.5,0.5\n"
                            "1001,0.1,0.1,0.1,0.1,0.1,0.1\n");
        CHECK_THROWS_WITH_AS(ingest::load_themes(p), doctest::Contains("duplicate"), DataError);
    }
}

TEST_CASE("load_census validates population and fractions") {
    TempDir dir;
    SUBCASE("valid row") {
        auto p = write_file(dir.file("census.csv"),
                            "fips,population,minority_pct,poverty_pct\n01001,55869,0.22,0.13\n");
        auto census = ingest::load_census(p);
        REQUIRE(census.size() == 1);
        CHECK(census[0].population == 55869);
        CHECK(census[0].minority_pct == 0.22);
        CHECK(census[0].poverty_pct == 0.13);
    }
    SUBCASE("percent-vs-fraction confusion is called out") {
        auto p = write_file(dir.file("census.csv"),
                            "fips,population,minority_pct,poverty_pct\n01001,55869,22,0.13\n");
        CHECK_THROWS_WITH_AS(ingest::load_census(p), doctest::Contains("percent"), DataError);
    }
    SUBCASE("zero population") {
        auto p = write_file(dir.file("census.csv"),
                            "fips,population,minority_pct,poverty_pct\n01001,0,0.2,0.1\n");
        CHECK_THROWS_WITH_AS(ingest::load_census(p), doctest::Contains("population"), DataError);
    }
}

TEST_CASE("load_index range checks the value") {
    TempDir dir;
    auto p = write_file(dir.file("index.csv"), "fips,value\n01001,0.75\n");
    auto index = ingest::load_index(p);
    REQUIRE(index.size() == 1);
    CHECK(index[0].value == 0.75);

    auto bad = write_file(dir.file("bad.csv"), "fips,value\n01001,1.5\n");
    CHECK_THROWS_AS(ingest::load_index(bad), DataError);
}

TEST_CASE("normalize_fips") {
    CHECK(ingest::normalize_fips("1001") == "01001");
    CHECK(ingest::normalize_fips("01001") == "01001");
    CHECK(ingest::normalize_fips("1001.0") == "01001");
    CHECK(ingest::normalize_fips(" 56045 ") == "56045");
    CHECK_FALSE(ingest::normalize_fips("").has_value());
    CHECK_FALSE(ingest::normalize_fips("0").has_value());
    CHECK_FALSE(ingest::normalize_fips("abc").has_value());
    CHECK_FALSE(ingest::normalize_fips("123456").has_value());
    CHECK_FALSE(ingest::normalize_fips("1001.5").has_value());
}
