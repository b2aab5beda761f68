#include "dtstop/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dtstop/errors.hpp"
#include "dtstop/parallel.hpp"

namespace dtstop {

std::uint64_t poly_dim(std::uint64_t m, std::uint64_t r) {
    // C(m + r, min(m, r)) built as a running product of exact binomials.
    const std::uint64_t k = std::min(m, r);
    const std::uint64_t n = m + r;
    if (n < m) throw DimensionTooLarge("poly_dim: overflow");
    unsigned __int128 value = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        value = value * (n - k + i) / i;
        if (value > std::numeric_limits<std::uint64_t>::max()) throw DimensionTooLarge("poly_dim: overflow");
    }
    return static_cast<std::uint64_t>(value);
}

double truncate(double value, double beta) {
    if (!(beta > 0.0)) throw DomainError("truncate: beta must be positive");
    return std::clamp(value, -beta, beta);
}

MonomialBasis::MonomialBasis(std::size_t m, int degree) : m_(m), degree_(degree) {
    if (degree < 0) throw DomainError("MonomialBasis: degree must be nonnegative");
    const std::uint64_t total = poly_dim(m, static_cast<std::uint64_t>(degree));
    if (total > 50'000'000) throw DimensionTooLarge("MonomialBasis: basis too large to materialize");
    parent_.reserve(total);
    var_.reserve(total);
    parent_.push_back(0);
    var_.push_back(m);  // sentinel: the constant
    std::vector<std::size_t> last_var{0};  // smallest variable a child may use
    std::size_t begin = 0;
    std::size_t end = 1;
    for (int k = 1; k <= degree; ++k) {
        for (std::size_t i = begin; i < end; ++i) {
            for (std::size_t v = last_var[i]; v < m; ++v) {
                parent_.push_back(i);
                var_.push_back(v);
                last_var.push_back(v);
            }
        }
        begin = end;
        end = parent_.size();
    }
}

void MonomialBasis::evaluate(std::span<const double> x, std::span<double> out) const {
    if (x.size() != m_ || out.size() != size()) throw ShapeError("MonomialBasis: input or output size mismatch");
    out[0] = 1.0;
    for (std::size_t i = 1; i < parent_.size(); ++i) out[i] = out[parent_[i]] * x[var_[i]];
}

std::vector<double> MonomialBasis::evaluate(std::span<const double> x) const {
    std::vector<double> out(size());
    evaluate(x, out);
    return out;
}

std::vector<int> MonomialBasis::exponents(std::size_t i) const {
    std::vector<int> e(m_, 0);
    while (i != 0) {
        ++e[var_[i]];
        i = parent_[i];
    }
    return e;
}

std::vector<double> history_inputs(History history, const Architecture& arch) {
    if (history.size() != arch.steps) throw ShapeError("features: history length does not match the architecture");
    const auto d = static_cast<std::size_t>(arch.dim);
    std::vector<double> x(arch.inputs(), 0.0);
    for (std::size_t n = 0; n < history.size(); ++n) {
        const auto& inc = history[n];
        if (inc.mark.coordinate < 1 || inc.mark.coordinate > arch.dim)
            throw ShapeError("features: mark coordinate outside the architecture dimension");
        double* slot = x.data() + n * (d + 1);
        slot[0] = inc.dt / arch.horizon;
        slot[static_cast<std::size_t>(inc.mark.coordinate)] = inc.mark.sign;
    }
    return x;
}

std::vector<double> features(History history, const Architecture& arch) {
    const MonomialBasis basis(arch.inputs(), arch.degree);
    return basis.evaluate(history_inputs(history, arch));
}

int schedule_degree_for_inputs(std::uint64_t N, std::size_t m) {
    if (N < 2) throw DomainError("schedule_degree: need N >= 2");
    const std::size_t power = m + 2;
    auto fits = [&](std::uint64_t r) {
        // r^power <= N by repeated multiplication.
        long double acc = 1.0L;
        for (std::size_t i = 0; i < power; ++i) {
            acc *= static_cast<long double>(r);
            if (acc > static_cast<long double>(N)) return false;
        }
        return true;
    };
    auto r = static_cast<std::uint64_t>(std::floor(std::pow(static_cast<double>(N), 1.0 / static_cast<double>(power))));
    while (r > 1 && !fits(r)) --r;
    while (fits(r + 1)) ++r;
    return static_cast<int>(std::max<std::uint64_t>(1, r));
}

int schedule_degree(std::uint64_t N, std::size_t j, int d) {
    if (j < 1 || d < 1) throw DomainError("schedule_degree: need j >= 1 and d >= 1");
    return schedule_degree_for_inputs(N, j * static_cast<std::size_t>(d + 1));
}

Architecture architecture_schedule(std::uint64_t N, std::size_t j, int d, double bound, double horizon) {
    if (!(bound > 0.0)) throw DomainError("architecture_schedule: bound must be positive");
    Architecture arch;
    arch.dim = d;
    arch.steps = j;
    arch.degree = schedule_degree(N, j, d);
    arch.bound = bound;
    arch.horizon = horizon;
    return arch;
}

double evaluate(const FitResult& fit, std::span<const double> feature_row) {
    if (feature_row.size() != fit.coefficients.size()) throw ShapeError("evaluate: feature length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < feature_row.size(); ++i) s += fit.coefficients[i] * feature_row[i];
    return std::clamp(s, -fit.bound, fit.bound);
}

double evaluate(const FitResult& fit, History history, const Architecture& arch) {
    return evaluate(fit, features(history, arch));
}

namespace {

std::vector<std::size_t> usable_rows(std::span<const double> targets) {
    std::vector<std::size_t> rows;
    rows.reserve(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i)
        if (std::isfinite(targets[i])) rows.push_back(i);
    if (rows.empty()) throw DataError("least squares: no finite targets");
    return rows;
}

void finish(FitResult& fit, std::size_t p, const RowFunction& row, std::span<const double> targets,
            const std::vector<std::size_t>& rows, const LeastSquaresOptions& options) {
    // Risks in fixed chunk order.
    const std::size_t chunks = (rows.size() + options.chunk_rows - 1) / options.chunk_rows;
    std::vector<double> raw(chunks, 0.0);
    std::vector<double> clamped(chunks, 0.0);
    parallel_for(chunks, [&](std::size_t c) {
        std::vector<double> phi(p);
        const std::size_t lo = c * options.chunk_rows;
        const std::size_t hi = std::min(rows.size(), lo + options.chunk_rows);
        for (std::size_t r = lo; r < hi; ++r) {
            row(rows[r], phi);
            double s = 0.0;
            for (std::size_t k = 0; k < p; ++k) s += fit.coefficients[k] * phi[k];
            const double y = targets[rows[r]];
            raw[c] += (y - s) * (y - s);
            const double sc = std::clamp(s, -fit.bound, fit.bound);
            clamped[c] += (y - sc) * (y - sc);
        }
    });
    double a = 0.0;
    double b = 0.0;
    for (std::size_t c = 0; c < chunks; ++c) {
        a += raw[c];
        b += clamped[c];
    }
    fit.samples = rows.size();
    fit.raw_risk = a / static_cast<double>(rows.size());
    fit.risk = b / static_cast<double>(rows.size());
}

}  // namespace

FitResult fit_least_squares(std::size_t N, std::size_t p, const RowFunction& row, std::span<const double> targets,
                            double bound, const LeastSquaresOptions& options) {
    if (targets.size() != N) throw ShapeError("least squares: target count differs from sample count");
    if (p == 0) throw ShapeError("least squares: empty basis");
    if (!(bound > 0.0)) throw DomainError("least squares: bound must be positive");
    const auto rows = usable_rows(targets);
    const std::size_t n = rows.size();

    FitResult fit;
    fit.bound = bound;
    Eigen::VectorXd coef;

    if (n * p <= options.direct_limit) {
        Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
        Eigen::VectorXd y(static_cast<Eigen::Index>(n));
        std::vector<double> phi(p);
        for (std::size_t r = 0; r < n; ++r) {
            row(rows[r], phi);
            for (std::size_t k = 0; k < p; ++k) X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = phi[k];
            y(static_cast<Eigen::Index>(r)) = targets[rows[r]];
        }
        Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
        svd.setThreshold(options.singular_cutoff);
        coef = svd.solve(y);
        fit.rank = static_cast<std::size_t>(svd.rank());
    } else {
        const std::size_t chunks = (n + options.chunk_rows - 1) / options.chunk_rows;
        const auto P = static_cast<Eigen::Index>(p);
        std::vector<Eigen::MatrixXd> grams(chunks);
        std::vector<Eigen::VectorXd> rhs(chunks);
        parallel_for(chunks, [&](std::size_t c) {
            const std::size_t lo = c * options.chunk_rows;
            const std::size_t hi = std::min(n, lo + options.chunk_rows);
            const auto rows_in = static_cast<Eigen::Index>(hi - lo);
            Eigen::MatrixXd Xc(rows_in, P);
            Eigen::VectorXd yc(rows_in);
            std::vector<double> phi(p);
            for (std::size_t r = lo; r < hi; ++r) {
                row(rows[r], phi);
                const auto i = static_cast<Eigen::Index>(r - lo);
                for (std::size_t k = 0; k < p; ++k) Xc(i, static_cast<Eigen::Index>(k)) = phi[k];
                yc(i) = targets[rows[r]];
            }
            Eigen::MatrixXd G = Eigen::MatrixXd::Zero(P, P);
            G.selfadjointView<Eigen::Lower>().rankUpdate(Xc.transpose());
            grams[c] = std::move(G);
            rhs[c] = Xc.transpose() * yc;
        });
        Eigen::MatrixXd G = Eigen::MatrixXd::Zero(P, P);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(P);
        for (std::size_t c = 0; c < chunks; ++c) {
            G += grams[c];
            b += rhs[c];
            grams[c].resize(0, 0);
        }
        G = G.selfadjointView<Eigen::Lower>();

        // Column equilibration, then a truncated eigen-solve (minimum norm in scaled coordinates).
        Eigen::VectorXd scale(P);
        for (Eigen::Index k = 0; k < P; ++k) scale(k) = G(k, k) > 0.0 ? 1.0 / std::sqrt(G(k, k)) : 0.0;
        const Eigen::MatrixXd Gs = scale.asDiagonal() * G * scale.asDiagonal();
        const Eigen::VectorXd bs = scale.asDiagonal() * b;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Gs);
        if (eig.info() != Eigen::Success) throw NumericalFailure("least squares: eigen-solve failed", 0.0);
        const Eigen::VectorXd& lambda = eig.eigenvalues();
        const double top = lambda.maxCoeff();
        Eigen::VectorXd proj = eig.eigenvectors().transpose() * bs;
        std::size_t rank = 0;
        for (Eigen::Index k = 0; k < P; ++k) {
            if (lambda(k) > options.eigen_cutoff * top) {
                proj(k) /= lambda(k);
                ++rank;
            } else {
                proj(k) = 0.0;
            }
        }
        coef = scale.asDiagonal() * (eig.eigenvectors() * proj);
        fit.rank = rank;
    }

    fit.coefficients.assign(coef.data(), coef.data() + coef.size());
    for (double c : fit.coefficients)
        if (!std::isfinite(c)) throw NumericalFailure("least squares: non-finite coefficient", c);
    finish(fit, p, row, targets, rows, options);
    return fit;
}

FitResult fit_least_squares(const Eigen::MatrixXd& X, std::span<const double> targets, double bound,
                            const LeastSquaresOptions& options) {
    const auto N = static_cast<std::size_t>(X.rows());
    const auto p = static_cast<std::size_t>(X.cols());
    RowFunction row = [&](std::size_t i, std::span<double> out) {
        for (std::size_t k = 0; k < p; ++k) out[k] = X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    };
    return fit_least_squares(N, p, row, targets, bound, options);
}

FitResult fit_least_squares(const std::vector<std::vector<double>>& rows, std::span<const double> targets,
                            double bound, const LeastSquaresOptions& options) {
    if (rows.empty()) throw DataError("least squares: no samples");
    const std::size_t p = rows.front().size();
    for (const auto& r : rows)
        if (r.size() != p) throw ShapeError("least squares: ragged feature rows");
    RowFunction row = [&](std::size_t i, std::span<double> out) { std::copy(rows[i].begin(), rows[i].end(), out.begin()); };
    return fit_least_squares(rows.size(), p, row, targets, bound, options);
}

double empirical_risk(const Eigen::MatrixXd& X, std::span<const double> targets, std::span<const double> coefficients,
                      double bound) {
    if (static_cast<std::size_t>(X.cols()) != coefficients.size() || static_cast<std::size_t>(X.rows()) != targets.size())
        throw ShapeError("empirical_risk: shape mismatch");
    double s = 0.0;
    std::size_t n = 0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const double y = targets[static_cast<std::size_t>(i)];
        if (!std::isfinite(y)) continue;
        double v = 0.0;
        for (Eigen::Index k = 0; k < X.cols(); ++k) v += X(i, k) * coefficients[static_cast<std::size_t>(k)];
        v = std::clamp(v, -bound, bound);
        s += (y - v) * (y - v);
        ++n;
    }
    return n ? s / static_cast<double>(n) : 0.0;
}

}  // namespace dtstop
