#pragma once

#include <cstddef>
#include <optional>
#include <string>

namespace dtstop {

struct BoundInputs {
    double N = 1e4;
    std::size_t periods = 1;  // e(k, T)
    std::size_t step = 0;     // j
    double B = 1.0;
    double L = 1.0;
    double nu = 2.0;
    double C = 1.0;           // unspecified numerical constant, reported symbolically
    std::optional<double> alpha;
};

/// Constants of the least-squares error bounds and the stochastic term
///   6^(e-j) C (B+L)^2 (sqrt(nu c_j) log^(1/2) N + log^(1/2) C_jk) / N^(1/2).
/// Reporting only: the constants are not claimed to be sharp.
struct BoundReport {
    double c_j = 0.0;
    double C_BL = 0.0;        // 36 (B + L)^2
    double log_C_jk = 0.0;    // C_jk itself overflows quickly
    double stochastic_term = 0.0;
    double B = 0.0, L = 0.0, nu = 0.0, C = 0.0, N = 0.0;
    std::size_t periods = 0, step = 0;
    /// 36 C_BL^2 / alpha and whether N falls short of it.
    std::optional<double> sample_threshold;
    bool threshold_violated = false;
};

/// c_j = 2 (e - j + 1) log2(e_euler (e - j + 1)).
double c_constant(std::size_t periods, std::size_t step);
BoundReport error_bound_report(const BoundInputs& in);

/// phi(k): geometric base^-k or algebraic (1 + k)^-p; xi is its inverse.
struct PhiSpec {
    enum class Kind { geometric, algebraic } kind = Kind::geometric;
    double base = 2.0;
    double power = 1.0;

    double phi(double k) const;
    double xi(double y) const;
    std::string describe() const;
};

enum class PlanRounding {
    /// Full precision throughout.
    exact,
    /// e1^(1/(2 beta)) to three decimals and k* to two decimals before the
    /// period count, the arithmetic behind the published table.
    printed,
};

struct Plan {
    double target_root = 0.0;  // e1^(1/(2 beta)), as used
    double k_star = 0.0;
    double epsilon = 0.0;      // phi(k*)
    std::size_t periods = 0;   // d * ceil(T / phi(k*)^2)
};

/// k* = xi(e1^(1/(2 beta))). DomainError unless e1 in (0, 1) and beta in (0, 1].
Plan plan_resolution(double e1, double beta, const PhiSpec& phi = {}, int d = 1, double horizon = 1.0,
                     PlanRounding rounding = PlanRounding::printed);

}  // namespace dtstop
