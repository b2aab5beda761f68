#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dtstop/skeleton.hpp"

namespace dtstop {

/// (r + m)! / (r! m!), exact. DimensionTooLarge when it does not fit in 64 bits.
std::uint64_t poly_dim(std::uint64_t m, std::uint64_t r);

/// clamp(value, -beta, beta).
double truncate(double value, double beta);

/// All monomials of total degree <= r in m variables, graded (constant first,
/// then degree 1 in variable order, ...). Each monomial is its parent times one
/// variable, so a full evaluation costs one multiply per monomial.
class MonomialBasis {
public:
    MonomialBasis(std::size_t m, int degree);

    std::size_t inputs() const noexcept { return m_; }
    int degree() const noexcept { return degree_; }
    std::size_t size() const noexcept { return parent_.size(); }

    void evaluate(std::span<const double> x, std::span<double> out) const;
    std::vector<double> evaluate(std::span<const double> x) const;
    /// Exponent vector of monomial i.
    std::vector<int> exponents(std::size_t i) const;

private:
    std::size_t m_;
    int degree_;
    std::vector<std::size_t> parent_;
    std::vector<std::size_t> var_;
};

/// Polynomial architecture on the flattened j-step history
/// (s_1/T, x_1 .. x_d, ..., s_j/T, x_1 .. x_d), x the mark vector.
struct Architecture {
    int dim = 1;
    std::size_t steps = 0;
    int degree = 1;
    double bound = 1.0;
    double horizon = 1.0;

    std::size_t inputs() const { return steps * static_cast<std::size_t>(dim + 1); }
    std::uint64_t basis_size() const { return poly_dim(inputs(), static_cast<std::uint64_t>(degree)); }
    /// Upper bound on the VC dimension of the (untruncated) linear span.
    std::uint64_t vc_bound() const { return 1 + basis_size(); }
};

/// Normalized flattened history; ShapeError when its length differs from arch.steps.
std::vector<double> history_inputs(History history, const Architecture& arch);
std::vector<double> features(History history, const Architecture& arch);

/// Degree max(1, floor(N^(1/(j(d+1)+2)))), computed with an exact integer correction.
int schedule_degree(std::uint64_t N, std::size_t j, int d);
/// Same rule for an arbitrary input count m: max(1, floor(N^(1/(m+2)))).
int schedule_degree_for_inputs(std::uint64_t N, std::size_t m);
Architecture architecture_schedule(std::uint64_t N, std::size_t j, int d, double bound, double horizon = 1.0);

struct FitResult {
    std::vector<double> coefficients;
    double risk = 0.0;      // after clamping to [-bound, bound]
    double raw_risk = 0.0;  // before clamping
    std::size_t samples = 0;
    double bound = 1.0;
    std::size_t rank = 0;
};

double evaluate(const FitResult& fit, std::span<const double> feature_row);
double evaluate(const FitResult& fit, History history, const Architecture& arch);

/// Row generator: writes the features of sample i into out.
using RowFunction = std::function<void(std::size_t i, std::span<double> out)>;

struct LeastSquaresOptions {
    /// Singular values below cutoff * largest are dropped (minimum-norm solution).
    double singular_cutoff = 1e-12;
    /// Above this many matrix entries the fit switches to chunked normal equations.
    std::size_t direct_limit = 500'000;
    std::size_t chunk_rows = 8192;
    /// Relative eigenvalue cutoff of the equilibrated Gram matrix on the chunked path.
    double eigen_cutoff = 1e-13;
};

/// Minimizes (1/N) sum (y_i - <c, phi_i>)^2 over c. Rows with non-finite targets
/// are skipped; DataError if none is left. Chunks are accumulated in a fixed
/// order, so the result does not depend on the thread count.
FitResult fit_least_squares(std::size_t N, std::size_t p, const RowFunction& row, std::span<const double> targets,
                            double bound, const LeastSquaresOptions& options = {});
FitResult fit_least_squares(const Eigen::MatrixXd& X, std::span<const double> targets, double bound,
                            const LeastSquaresOptions& options = {});
FitResult fit_least_squares(const std::vector<std::vector<double>>& rows, std::span<const double> targets,
                            double bound, const LeastSquaresOptions& options = {});

/// (1/N) sum (y_i - clamp(<c, phi_i>))^2 for arbitrary coefficients c.
double empirical_risk(const Eigen::MatrixXd& X, std::span<const double> targets, std::span<const double> coefficients,
                      double bound);

}  // namespace dtstop
