#pragma once

#include <chrono>
#include <compare>
#include <string>

namespace c19vi {

// Calendar date with day-resolution arithmetic. Thin wrapper over
// std::chrono::sys_days so dates stay printable and comparable.
class Date {
public:
    Date() = default;
    Date(int year, unsigned month, unsigned day);

    // Parses "YYYY-MM-DD".
    static Date parse_iso(const std::string& text);
    // Parses the "M/D/YY" column-header form (two-digit year, 2000-based).
    static Date parse_mdy(const std::string& text);
    // Returns true if `text` parses as either supported form.
    static bool try_parse(const std::string& text, Date& out);

    std::string to_iso() const;

    Date plus_days(long n) const;
    long days_until(const Date& other) const;

    int year() const;
    unsigned month() const;
    unsigned day() const;

    auto operator<=>(const Date&) const = default;

private:
    explicit Date(std::chrono::sys_days d) : days_(d) {}
    std::chrono::sys_days days_{};
};

} // namespace c19vi
