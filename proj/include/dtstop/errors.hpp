#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dtstop {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (t <= 0, e1 not in (0,1), ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Period count d*ceil(T/eps^2) does not fit the index type.
class ResolutionTooFine : public Error {
public:
    using Error::Error;
};

/// A mark vector with zero or several nonzero entries, or a nonzero entry other than +-1.
class InvalidMark : public Error {
public:
    using Error::Error;
};

/// History containing a non-positive inter-arrival time or an invalid mark.
class InvalidHistory : public Error {
public:
    using Error::Error;
};

/// Adaptive quadrature ran out of panels before reaching its tolerance.
class NumericalFailure : public Error {
public:
    NumericalFailure(const std::string& what, double residual)
        : Error(what + " (residual estimate " + std::to_string(residual) + ")"),
          residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Drift, diffusion or payoff evaluated to a non-finite value.
class CoefficientError : public Error {
public:
    using Error::Error;
};

/// Feature / coefficient / history lengths that do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Regression data unusable (every target non-finite, empty sample).
class DataError : public Error {
public:
    using Error::Error;
};

/// Polynomial space dimension overflows.
class DimensionTooLarge : public Error {
public:
    using Error::Error;
};

/// Dynamic-programming oracle asked to expand a tree beyond its cost gate.
class InstanceTooLarge : public Error {
public:
    using Error::Error;
};

/// Least-squares fit failed at a given backward step.
class StepError : public Error {
public:
    StepError(std::size_t step, const std::string& what)
        : Error("step " + std::to_string(step) + ": " + what), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Non-finite payoff on a simulated path.
class PathError : public Error {
public:
    PathError(std::size_t path, const std::string& what)
        : Error("path " + std::to_string(path) + ": " + what), path_(path) {}

    std::size_t path() const noexcept { return path_; }

private:
    std::size_t path_;
};

}  // namespace dtstop
