#pragma once

#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

namespace c19vi {

// Minimal RFC-4180-ish CSV access: comma-delimited UTF-8, optional
// double-quoted fields with "" escapes, CR/LF tolerant.

struct CsvRow {
    std::vector<std::string> fields;
    std::size_t line_number = 0; // 1-based, for error messages
};

class CsvReader {
public:
    explicit CsvReader(const std::string& path);

    // Reads the next record. Returns false at end of file. Blank lines are
    // skipped. Throws DataError on an unterminated quoted field.
    bool next(CsvRow& row);

    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::ifstream in_;
    std::size_t line_ = 0;
};

// Splits one CSV record held in memory (no trailing newline handling needed).
std::vector<std::string> split_csv_line(const std::string& line);

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path);
    void write_row(const std::vector<std::string>& fields);
    void close();

private:
    std::string path_;
    std::ofstream out_;
};

// Shortest decimal form that round-trips the exact double value.
std::string format_double(double v);

// Strict numeric parsers; raise DataError with `context` on failure.
double parse_double(const std::string& text, const std::string& context);
long long parse_integer(const std::string& text, const std::string& context);

} // namespace c19vi
