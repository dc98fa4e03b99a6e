#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wismc {

enum class ErrorKind {
    parse,
    ordering,
    insufficient_data,
    parameter,
    alignment,
    undefined,
    estimation,
    resource,
    io,
};

[[nodiscard]] const char* to_string(ErrorKind kind) noexcept;

// Single exception type for the library; the kind drives CLI exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message, std::size_t line = 0)
        : std::runtime_error(message), kind_(kind), line_(line) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
    // 1-based input line for parse errors, 0 otherwise.
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    ErrorKind kind_;
    std::size_t line_;
};

}  // namespace wismc
