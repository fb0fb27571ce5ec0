#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace amar {

// Numeric values double as CLI exit codes.
enum class ErrorKind : int {
    Config = 1,
    Io = 2,
    Backend = 3,
    Validation = 4,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

/// Collected rule violations. Used where a check reports problems as data
/// instead of throwing.
struct ValidationReport {
    std::vector<std::string> violations;

    bool ok() const noexcept { return violations.empty(); }
    void add(std::string violation) { violations.push_back(std::move(violation)); }
};

}  // namespace amar
