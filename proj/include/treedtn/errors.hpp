#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace treedtn {

enum class ErrorKind {
    Precondition,       // domain / range / malformed input
    NoBoundedSolution,  // beta >= 1/2 with non-constant data
    SingularPoint,      // kernel evaluated at psi(pi)
    HypothesisViolation,
    KernelFormInvalid,  // beta outside (1/(m+1), 1/2)
    Unsupported,
    ToleranceNotMet,
    Overflow,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct PreconditionError : Error {
    explicit PreconditionError(const std::string& what) : Error(ErrorKind::Precondition, what) {}
};

struct NoBoundedSolutionError : Error {
    explicit NoBoundedSolutionError(const std::string& what)
        : Error(ErrorKind::NoBoundedSolution, what) {}
};

struct SingularPointError : Error {
    explicit SingularPointError(const std::string& what) : Error(ErrorKind::SingularPoint, what) {}
};

struct HypothesisViolationError : Error {
    explicit HypothesisViolationError(const std::string& what)
        : Error(ErrorKind::HypothesisViolation, what) {}
};

struct KernelFormInvalidError : Error {
    explicit KernelFormInvalidError(const std::string& what)
        : Error(ErrorKind::KernelFormInvalid, what) {}
};

struct UnsupportedOperationError : Error {
    explicit UnsupportedOperationError(const std::string& what)
        : Error(ErrorKind::Unsupported, what) {}
};

/// Raised when adaptive quadrature exhausts its evaluation budget. Carries the
/// best estimate reached so far.
struct ToleranceNotMetError : Error {
    ToleranceNotMetError(const std::string& what, double estimate, double error_estimate)
        : Error(ErrorKind::ToleranceNotMet, what),
          best_estimate(estimate),
          best_error(error_estimate) {}
    double best_estimate;
    double best_error;
};

struct OverflowError : Error {
    explicit OverflowError(const std::string& what) : Error(ErrorKind::Overflow, what) {}
};

}  // namespace treedtn
