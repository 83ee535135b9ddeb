#pragma once

#include <stdexcept>
#include <string>

namespace facing {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller passed arguments that violate a precondition.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Inputs are well-formed but carry no usable information (all-zero signal, flat spectrum).
class DegenerateInput : public Error {
public:
    using Error::Error;
};

/// A geometric problem lacks enough constraints to fix a unique solution.
class Underdetermined : public Error {
public:
    using Error::Error;
};

/// Bearing rays produce no usable intersection.
class NoIntersection : public Error {
public:
    using Error::Error;
};

/// Configuration text failed to parse or validate. `line` is 1-based, 0 if unknown.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message, int line = 0, const std::string& file = {})
        : Error(format(message, line, file)), message_(message), line_(line) {}

    [[nodiscard]] int line() const noexcept { return line_; }
    [[nodiscard]] const std::string& message() const noexcept { return message_; }

private:
    static std::string format(const std::string& message, int line, const std::string& file) {
        std::string out = file.empty() ? "" : file + ":";
        if (line > 0) out += (file.empty() ? "line " : "") + std::to_string(line) + ": ";
        else if (!file.empty()) out += " ";
        return out + message;
    }

    std::string message_;
    int line_;
};

}  // namespace facing
