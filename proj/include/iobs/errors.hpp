#pragma once

#include <stdexcept>
#include <string>

namespace iobs {

// Base for every failure raised by the library. `name()` is the stable
// machine-readable identifier surfaced in CLI output and reports.
class Error : public std::runtime_error {
public:
    Error(std::string name, const std::string& what)
        : std::runtime_error(name + ": " + what), name_(std::move(name)) {}
    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

// Bad user input: malformed config, inconsistent dimensions, unordered
// bounds, signals outside their envelopes. CLI exit code 2.
class ValidationError : public Error {
public:
    using Error::Error;
    ValidationError(const std::string& what) : Error("ValidationError", what) {}
};

class SyntaxError : public ValidationError {
public:
    SyntaxError(const std::string& what, std::size_t position)
        : ValidationError("SyntaxError", what + " (at position " + std::to_string(position) + ")"),
          position_(position) {}
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

class EnvelopeViolation : public ValidationError {
public:
    EnvelopeViolation(const std::string& what) : ValidationError("EnvelopeViolation", what) {}
};

// Synthesis cannot proceed on this plant / with these gains. CLI exit code 3.
class DesignError : public Error {
public:
    using Error::Error;
};

class NearSingular : public DesignError {
public:
    NearSingular(const std::string& what) : DesignError("NearSingular", what) {}
    NearSingular(std::string name, const std::string& what) : DesignError(std::move(name), what) {}
};

class NearSingularT : public NearSingular {
public:
    NearSingularT(const std::string& what) : NearSingular("NearSingularT", what) {}
};

class SpectraOverlap : public DesignError {
public:
    SpectraOverlap(const std::string& what) : DesignError("SpectraOverlap", what) {}
};

class ZeroObservableRank : public DesignError {
public:
    ZeroObservableRank(const std::string& what) : DesignError("ZeroObservableRank", what) {}
};

class NotDetectable : public DesignError {
public:
    NotDetectable(const std::string& what) : DesignError("NotDetectable", what) {}
};

class NotStable : public DesignError {
public:
    NotStable(const std::string& what) : DesignError("NotStable", what) {}
};

class NearDefective : public DesignError {
public:
    NearDefective(const std::string& what) : DesignError("NearDefective", what) {}
};

class InvalidGains : public DesignError {
public:
    InvalidGains(const std::string& what) : DesignError("InvalidGains", what) {}
};

// Runtime failure while stepping a model (divergence, non-finite state).
class SimulationError : public Error {
public:
    SimulationError(const std::string& what) : Error("SimulationError", what) {}
};

} // namespace iobs
