#pragma once

#include "dtstop/random.hpp"

namespace dtstop {

/// Survival, distribution function and density of an exit time evaluated together.
struct ExitTimeValues {
    double survival;
    double cdf;
    double density;
};

struct ExitTimeOptions {
    /// Series stop once the next term is below tolerance * |partial sum|.
    double tolerance = 1e-12;
    /// Scaled time below which the Gaussian-reflection series is used.
    double switch_point = 0.1;
};

/// Law of the first time a standard Brownian motion started at 0 leaves
/// (-epsilon, epsilon).
///
/// Unit-level values (epsilon = 1) come from two classical series:
///
///   spectral   S(x) = 4/pi * sum_n (-1)^n / (2n+1) * exp(-(2n+1)^2 pi^2 x / 8)
///   reflection F(x) = 2 * sum_k (-1)^k erfc((2k+1) / sqrt(2x))
///
/// the first for x >= switch_point, the second below it. The general level
/// follows from Brownian scaling, tau_eps = eps^2 * tau_1. Construction fails
/// with NumericalFailure if the two series disagree at the switch point by more
/// than 1e-10 (relative).
class ExitTimeDistribution {
public:
    explicit ExitTimeDistribution(double epsilon, ExitTimeOptions options = {});

    double epsilon() const noexcept { return epsilon_; }
    double mean() const noexcept { return eps2_; }
    const ExitTimeOptions& options() const noexcept { return options_; }

    /// Density at t > 0; DomainError otherwise.
    double density(double t) const;
    /// P(tau > t) for t >= 0; DomainError for t < 0.
    double survival(double t) const;
    double cdf(double t) const;
    /// All three at once, t > 0.
    ExitTimeValues evaluate(double t) const;

    /// Time t with survival(t) = u, for u in (0, 1).
    double survival_quantile(double u) const;
    /// One exit time drawn by inverting the survival function at a single uniform.
    double sample(Stream& stream) const { return survival_quantile(stream.uniform()); }

    /// Unit-level series, exposed for cross-checks and tests.
    static ExitTimeValues spectral_series(double x, double tolerance);
    static ExitTimeValues reflection_series(double x, double tolerance);
    /// Unit-level quantile: x with S_1(x) = u.
    double unit_survival_quantile(double u) const;

private:
    ExitTimeValues unit_values(double x) const;

    double epsilon_;
    double eps2_;
    ExitTimeOptions options_;
};

}  // namespace dtstop
