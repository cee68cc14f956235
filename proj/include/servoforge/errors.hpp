#pragma once

#include <stdexcept>
#include <string>

namespace servoforge {

// All library failures derive from Error. The kind string is a stable
// identifier used by callers (and the CLI) to map failures onto exit codes
// without parsing messages.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

struct DimensionError : Error {
    explicit DimensionError(const std::string& msg) : Error("dimension", msg) {}
};

struct DomainError : Error {
    explicit DomainError(const std::string& msg) : Error("domain", msg) {}
};

// Iteration caps exceeded, non-finite intermediates and similar.
struct NumericalError : Error {
    explicit NumericalError(const std::string& msg) : Error("numeric", msg) {}
};

struct SingularityError : Error {
    SingularityError(const std::string& msg, double condition_estimate)
        : Error("singular", msg), condition_estimate(condition_estimate) {}
    double condition_estimate;
};

struct ControllabilityError : Error {
    ControllabilityError(const std::string& msg, std::size_t rank, std::size_t order)
        : Error("uncontrollable", msg), rank(rank), order(order) {}
    std::size_t rank;
    std::size_t order;
};

struct ObservabilityError : Error {
    ObservabilityError(const std::string& msg, std::size_t rank, std::size_t order)
        : Error("unobservable", msg), rank(rank), order(order) {}
    std::size_t rank;
    std::size_t order;
};

// A design cannot be carried out for structural reasons (e.g. a plant zero
// coincides with a signal-model eigenvalue).
struct InfeasibleError : Error {
    explicit InfeasibleError(const std::string& msg) : Error("infeasible", msg) {}
};

struct InstabilityError : Error {
    explicit InstabilityError(const std::string& msg) : Error("instability", msg) {}
};

struct DivergenceError : Error {
    DivergenceError(const std::string& msg, double time)
        : Error("divergence", msg), time(time) {}
    double time;
};

// Frequency-response evaluation requested too close to a pole.
struct PoleProximityError : Error {
    explicit PoleProximityError(const std::string& msg) : Error("pole", msg) {}
};

struct UnsupportedError : Error {
    explicit UnsupportedError(const std::string& msg) : Error("unsupported", msg) {}
};

} // namespace servoforge
