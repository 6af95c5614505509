#pragma once

#include <stdexcept>
#include <string>

namespace fpd {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Construction of a parameter vector from empty or non-finite data.
class InvalidValue : public Error {
public:
    using Error::Error;
};

// Zero-norm input where a direction is required (cosine, normalize).
class DegenerateVector : public Error {
public:
    using Error::Error;
};

// All-zero matrix handed to the singular-vector extractor.
class DegenerateMatrix : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

// Fewer than two points handed to the scalar 2-means split.
class ClusterError : public Error {
public:
    using Error::Error;
};

class EmptyAggregation : public Error {
public:
    using Error::Error;
};

// Malformed IDX files or inconsistent image/label pairs.
class FormatError : public Error {
public:
    using Error::Error;
};

class TrainError : public Error {
public:
    using Error::Error;
};

class EvalError : public Error {
public:
    using Error::Error;
};

class AttackError : public Error {
public:
    using Error::Error;
};

// Invalid experiment configuration; carries the offending key.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

}  // namespace fpd
