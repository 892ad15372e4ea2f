#pragma once

#include <stdexcept>
#include <string>

namespace meldiff {

// Bad caller input: shapes, ranges, malformed arguments.
class InvalidArgument : public std::invalid_argument {
public:
    explicit InvalidArgument(const std::string& what) : std::invalid_argument(what) {}
};

// Query outside the mathematically defined domain (e.g. log-SNR at a schedule endpoint).
class OutOfDomain : public InvalidArgument {
public:
    explicit OutOfDomain(const std::string& what) : InvalidArgument(what) {}
};

// Parameterization cannot be inverted at the requested noise level (eps prediction at alpha = 0).
class SingularParameterization : public std::domain_error {
public:
    explicit SingularParameterization(const std::string& what) : std::domain_error(what) {}
};

// Distillation target denominator collapsed; indicates a schedule bug.
class DegenerateTarget : public std::runtime_error {
public:
    explicit DegenerateTarget(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values appeared mid-computation. Carries the step index when known.
class NumericFailure : public std::runtime_error {
public:
    explicit NumericFailure(const std::string& what, long step = -1)
        : std::runtime_error(what), step_(step) {}
    long step() const { return step_; }

private:
    long step_;
};

// A source audio file could not be decoded or read.
class IngestError : public std::runtime_error {
public:
    explicit IngestError(const std::string& what) : std::runtime_error(what) {}
};

// Checkpoint or tensor container failed its integrity checksum or is truncated.
class CorruptFile : public std::runtime_error {
public:
    explicit CorruptFile(const std::string& what) : std::runtime_error(what) {}
};

// Checkpoint format/layout version does not match this build.
class IncompatibleCheckpoint : public std::runtime_error {
public:
    explicit IncompatibleCheckpoint(const std::string& what) : std::runtime_error(what) {}
};

// Invalid run configuration; reported before any work starts.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace meldiff
