#include "c19vi/csv.hpp"

#include "c19vi/errors.hpp"

#include <charconv>
#include <cstdlib>

namespace c19vi {

CsvReader::CsvReader(const std::string& path) : path_(path), in_(path) {
    if (!in_) {
        throw DataError("cannot open file: " + path);
    }
}

bool CsvReader::next(CsvRow& row) {
    row.fields.clear();
    std::string line;
    while (std::getline(in_, line)) {
        ++line_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        row.line_number = line_;

        // Quoted fields may embed newlines; keep pulling lines until quotes balance.
        std::string record = line;
        while (true) {
            std::size_t quotes = 0;
            for (char c : record)
                if (c == '"') ++quotes;
            if (quotes % 2 == 0) break;
            std::string more;
            if (!std::getline(in_, more)) {
                throw DataError(path_ + ":" + std::to_string(row.line_number) +
                                ": unterminated quoted field");
            }
            ++line_;
            if (!more.empty() && more.back() == '\r') more.pop_back();
            record += '\n';
            record += more;
        }
        row.fields = split_csv_line(record);
        return true;
    }
    return false;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

CsvWriter::CsvWriter(const std::string& path) : path_(path), out_(path) {
    if (!out_) {
        throw DataError("cannot open file for writing: " + path);
    }
}

void CsvWriter::write_row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        const std::string& f = fields[i];
        if (f.find_first_of(",\"\n") != std::string::npos) {
            out_ << '"';
            for (char c : f) {
                if (c == '"') out_ << '"';
                out_ << c;
            }
            out_ << '"';
        } else {
            out_ << f;
        }
    }
    out_ << '\n';
}

void CsvWriter::close() {
    out_.close();
    if (out_.fail()) {
        throw DataError("write failed: " + path_);
    }
}

std::string format_double(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

double parse_double(const std::string& text, const std::string& context) {
    double v = 0;
    const char* begin = text.c_str();
    const char* end = begin + text.size();
    auto r = std::from_chars(begin, end, v);
    if (r.ec != std::errc() || r.ptr != end || text.empty()) {
        throw DataError(context + ": expected a number, got '" + text + "'");
    }
    return v;
}

long long parse_integer(const std::string& text, const std::string& context) {
    long long v = 0;
    const char* begin = text.c_str();
    const char* end = begin + text.size();
    auto r = std::from_chars(begin, end, v);
    if (r.ec != std::errc() || r.ptr != end || text.empty()) {
        throw DataError(context + ": expected an integer, got '" + text + "'");
    }
    return v;
}

} // namespace c19vi
