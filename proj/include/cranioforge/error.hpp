#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cranioforge {

enum class ErrorKind {
    InvalidInput,
    Schema,
    InsufficientData,
    OutOfRange,
    Partition,
    Degenerate,
    Io,
    Numerical,
    NotFound,
    Conflict,
};

const char* to_string(ErrorKind kind) noexcept;

/// Base exception for every failure raised by the library. The kind drives
/// CLI exit codes and HTTP status mapping.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Raised when a sampling coordinate falls outside its allowed interval.
class OutOfRangeError : public Error {
public:
    OutOfRangeError(const std::string& message, double lo, double hi)
        : Error(ErrorKind::OutOfRange, message), lo_(lo), hi_(hi) {}

    double lower() const noexcept { return lo_; }
    double upper() const noexcept { return hi_; }

private:
    double lo_;
    double hi_;
};

/// Raised for overlapping or incomplete region partitions.
class PartitionError : public Error {
public:
    PartitionError(const std::string& message, std::vector<int> overlapping, std::vector<int> missing)
        : Error(ErrorKind::Partition, message),
          overlapping_(std::move(overlapping)),
          missing_(std::move(missing)) {}

    const std::vector<int>& overlapping() const noexcept { return overlapping_; }
    const std::vector<int>& missing() const noexcept { return missing_; }

private:
    std::vector<int> overlapping_;
    std::vector<int> missing_;
};

}  // namespace cranioforge
