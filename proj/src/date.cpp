#include "c19vi/date.hpp"

#include "c19vi/errors.hpp"

#include <cstdio>

namespace c19vi {

namespace {

bool valid_ymd(int y, unsigned m, unsigned d) {
    using namespace std::chrono;
    year_month_day ymd{year{y}, month{m}, day{d}};
    return ymd.ok();
}

} // namespace

Date::Date(int year, unsigned month, unsigned day) {
    using namespace std::chrono;
    year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
    if (!ymd.ok()) {
        throw DataError("invalid calendar date: " + std::to_string(year) + "-" +
                        std::to_string(month) + "-" + std::to_string(day));
    }
    days_ = sys_days{ymd};
}

Date Date::parse_iso(const std::string& text) {
    int y = 0;
    unsigned m = 0, d = 0;
    char tail = 0;
    if (std::sscanf(text.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3 || !valid_ymd(y, m, d)) {
        throw DataError("expected ISO date YYYY-MM-DD, got '" + text + "'");
    }
    return Date(y, m, d);
}

Date Date::parse_mdy(const std::string& text) {
    unsigned m = 0, d = 0, yy = 0;
    char tail = 0;
    if (std::sscanf(text.c_str(), "%u/%u/%u%c", &m, &d, &yy, &tail) != 3 || yy > 99 ||
        !valid_ymd(static_cast<int>(2000 + yy), m, d)) {
        throw DataError("expected date M/D/YY, got '" + text + "'");
    }
    return Date(static_cast<int>(2000 + yy), m, d);
}

bool Date::try_parse(const std::string& text, Date& out) {
    try {
        out = text.find('/') != std::string::npos ? parse_mdy(text) : parse_iso(text);
        return true;
    } catch (const DataError&) {
        return false;
    }
}

std::string Date::to_iso() const {
    using namespace std::chrono;
    year_month_day ymd{days_};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()),
                  unsigned(ymd.day()));
    return buf;
}

Date Date::plus_days(long n) const {
    Date r;
    r.days_ = days_ + std::chrono::days{n};
    return r;
}

long Date::days_until(const Date& other) const {
    return (other.days_ - days_).count();
}

int Date::year() const {
    return int(std::chrono::year_month_day{days_}.year());
}

unsigned Date::month() const {
    return unsigned(std::chrono::year_month_day{days_}.month());
}

unsigned Date::day() const {
    return unsigned(std::chrono::year_month_day{days_}.day());
}

} // namespace c19vi
