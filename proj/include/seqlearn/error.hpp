#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace seqlearn {

// Process exit codes; see cli dispatch.
enum class ExitCode : int {
    ok = 0,
    runtime = 1,
    usage = 2,
    data = 3,
};

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual const char* error_class() const noexcept = 0;
    virtual ExitCode exit_code() const noexcept = 0;
};

class UsageError : public Error {
public:
    using Error::Error;
    const char* error_class() const noexcept override { return "usage_error"; }
    ExitCode exit_code() const noexcept override { return ExitCode::usage; }
};

// Bad configuration: inconsistent layer stacks, invalid hyperparameters, unknown keys.
class ConfigError : public Error {
public:
    using Error::Error;
    const char* error_class() const noexcept override { return "config_error"; }
    ExitCode exit_code() const noexcept override { return ExitCode::usage; }
};

class DataError : public Error {
public:
    using Error::Error;
    const char* error_class() const noexcept override { return "data_error"; }
    ExitCode exit_code() const noexcept override { return ExitCode::data; }
};

// Malformed file contents; carries the byte offset (or line number) where parsing stopped.
class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::size_t position)
        : DataError(what + " (at " + std::to_string(position) + ")"), position_(position) {}
    std::size_t position() const noexcept { return position_; }
    const char* error_class() const noexcept override { return "parse_error"; }

private:
    std::size_t position_;
};

class NumericError : public Error {
public:
    using Error::Error;
    const char* error_class() const noexcept override { return "numeric_error"; }
    ExitCode exit_code() const noexcept override { return ExitCode::runtime; }
};

class IoError : public Error {
public:
    using Error::Error;
    const char* error_class() const noexcept override { return "io_error"; }
    ExitCode exit_code() const noexcept override { return ExitCode::runtime; }
};

} // namespace seqlearn
