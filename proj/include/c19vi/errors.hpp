#pragma once

#include <stdexcept>
#include <string>

namespace c19vi {

// Bad input data (malformed files, range violations, unsatisfiable requests).
// The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad invocation (missing flags, invalid flag combinations). Exit code 1.
class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// A broken internal invariant. Exit code 3.
class InternalError : public std::logic_error {
public:
    explicit InternalError(const std::string& msg) : std::logic_error(msg) {}
};

} // namespace c19vi
