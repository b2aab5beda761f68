#include <doctest.h>

#include <cmath>
#include <random>

#include "dtstop/errors.hpp"
#include "dtstop/regression.hpp"

using namespace dtstop;

namespace {

// (r + m)! / (r! m!) by Pascal's rule, independent of the closed form.
std::uint64_t pascal(std::uint64_t m, std::uint64_t r) {
    std::vector<std::vector<std::uint64_t>> c(m + r + 1, std::vector<std::uint64_t>(m + r + 1, 0));
    for (std::size_t n = 0; n <= m + r; ++n) {
        c[n][0] = 1;
        for (std::size_t k = 1; k <= n; ++k) c[n][k] = c[n - 1][k - 1] + (k <= n - 1 ? c[n - 1][k] : 0);
    }
    return c[m + r][r];
}

Eigen::MatrixXd random_design(std::size_t N, std::size_t m, int degree, std::mt19937_64& rng) {
    const MonomialBasis basis(m, degree);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXd X(N, basis.size());
    std::vector<double> x(m);
    for (std::size_t i = 0; i < N; ++i) {
        for (auto& v : x) v = u(rng);
        const auto row = basis.evaluate(x);
        for (std::size_t k = 0; k < row.size(); ++k) X(i, k) = row[k];
    }
    return X;
}

}  // namespace

TEST_CASE("poly_dim") {
    CHECK(poly_dim(2, 2) == 6);
    for (std::uint64_t m = 1; m < 8; ++m) CHECK(poly_dim(m, 0) == 1);
    for (std::uint64_t r = 0; r < 10; ++r) CHECK(poly_dim(1, r) == r + 1);
    for (std::uint64_t m = 1; m < 9; ++m)
        for (std::uint64_t r = 0; r < 9; ++r) CHECK(poly_dim(m, r) == pascal(m, r));
    CHECK_THROWS_AS(poly_dim(200, 200), DimensionTooLarge);
}

TEST_CASE("monomial basis") {
    const MonomialBasis b(2, 1);
    CHECK(b.evaluate(std::vector<double>{0.3, -0.7}) == std::vector<double>{1.0, 0.3, -0.7});
    CHECK(MonomialBasis(3, 0).evaluate(std::vector<double>{1, 2, 3}) == std::vector<double>{1.0});
    for (std::size_t m = 1; m <= 4; ++m)
        for (int r = 0; r <= 4; ++r) {
            const MonomialBasis basis(m, r);
            CHECK(basis.size() == poly_dim(m, static_cast<std::uint64_t>(r)));
            const std::vector<double> x{0.9, -0.4, 0.25, 1.3};
            const auto v = basis.evaluate(std::span<const double>(x.data(), m));
            for (std::size_t i = 0; i < basis.size(); ++i) {
                const auto e = basis.exponents(i);
                double expect = 1.0;
                int total = 0;
                for (std::size_t l = 0; l < m; ++l) {
                    expect *= std::pow(x[l], e[l]);
                    total += e[l];
                }
                CHECK(total <= r);
                CHECK(v[i] == doctest::Approx(expect).epsilon(1e-13));
            }
        }
}

TEST_CASE("features of histories") {
    const std::vector<Increment> h{{0.25, {1, 1.0}}, {0.5, {2, -1.0}}};
    Architecture arch{2, 2, 1, 1.0, 1.0};
    const auto x = history_inputs(h, arch);
    CHECK(x == std::vector<double>{0.25, 1, 0, 0.5, 0, -1});
    CHECK(features(h, arch).size() == poly_dim(6, 1));
    arch.degree = 0;
    CHECK(features(h, arch) == std::vector<double>{1.0});
    arch.steps = 3;
    CHECK_THROWS_AS(history_inputs(h, arch), ShapeError);
}

TEST_CASE("architecture schedule") {
    CHECK(schedule_degree(10000, 1, 1) == 10);
    CHECK(schedule_degree(2, 3, 2) == 1);
    CHECK_THROWS_AS(schedule_degree(1, 1, 1), DomainError);
    for (std::size_t j = 1; j <= 4; ++j) {
        int prev = 1;
        for (std::uint64_t N = 2; N < 2000000; N = N * 3 / 2 + 1) {
            const int r = schedule_degree(N, j, 1);
            CHECK(r >= prev);
            prev = r;
        }
    }
    // exact at perfect powers
    CHECK(schedule_degree_for_inputs(1u << 20, 2) == 32);
    CHECK(schedule_degree_for_inputs((1u << 20) - 1, 2) == 31);
    const auto arch = architecture_schedule(10000, 1, 1, 2.0);
    CHECK(arch.degree == 10);
    CHECK(arch.bound == 2.0);
    CHECK(arch.vc_bound() >= arch.basis_size());
}

TEST_CASE("truncate") {
    CHECK(truncate(5.0, 2.0) == 2.0);
    CHECK(truncate(-0.3, 2.0) == -0.3);
    CHECK(truncate(-7.0, 2.0) == -2.0);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 5.0);
    for (int i = 0; i < 100; ++i) {
        const double x = n(rng);
        CHECK(truncate(truncate(x, 1.5), 1.5) == truncate(x, 1.5));
    }
}

TEST_CASE("least squares: mean, interpolation, clamp") {
    std::mt19937_64 rng(3);
    const std::vector<double> y{0.1, 0.5, 0.3, 0.9};
    const std::vector<std::vector<double>> ones(4, std::vector<double>{1.0});
    const auto mean = fit_least_squares(ones, y, 10.0);
    CHECK(mean.coefficients[0] == doctest::Approx(0.45));
    const auto clamped = fit_least_squares(ones, y, 0.2);
    CHECK(evaluate(clamped, std::vector<double>{1.0}) == 0.2);

    const Eigen::MatrixXd X = random_design(300, 2, 3, rng);
    Eigen::VectorXd c = Eigen::VectorXd::Random(X.cols()) * 0.1;
    const Eigen::VectorXd t = X * c;
    std::vector<double> targets(t.data(), t.data() + t.size());
    const auto fit = fit_least_squares(X, targets, 10.0);
    CHECK(fit.raw_risk <= 1e-18);
    for (Eigen::Index i = 0; i < 10; ++i) {
        std::vector<double> row(X.cols());
        for (Eigen::Index k = 0; k < X.cols(); ++k) row[k] = X(i, k);
        CHECK(std::abs(evaluate(fit, row) - targets[i]) < 1e-9);
    }

    FitResult zero;
    zero.coefficients.assign(3, 0.0);
    zero.bound = 1.0;
    CHECK(evaluate(zero, std::vector<double>{1, 2, 3}) == 0.0);
    FitResult big{{3.0}, 0, 0, 0, 1.0, 1};
    CHECK(evaluate(big, std::vector<double>{1.0}) == 1.0);
}

TEST_CASE("least squares: argmin dominance over random candidates") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const Eigen::MatrixXd X = random_design(500, 2, 2, rng);
    std::vector<double> y(500);
    for (auto& v : y) v = u(rng);
    const auto fit = fit_least_squares(X, y, 1e6);
    for (int k = 0; k < 100; ++k) {
        std::vector<double> c(X.cols());
        for (auto& v : c) v = u(rng);
        CHECK(empirical_risk(X, y, c, 1e6) - fit.raw_risk >= -1e-10);
    }
}

TEST_CASE("least squares: chunked path matches the direct path") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> noise(0.0, 0.1);
    const Eigen::MatrixXd X = random_design(20000, 3, 3, rng);
    std::vector<double> y(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) y[i] = std::sin(X(i, 1)) + X(i, 2) * X(i, 3) + noise(rng);
    LeastSquaresOptions direct, chunked;
    chunked.direct_limit = 0;
    chunked.chunk_rows = 1000;
    const auto a = fit_least_squares(X, y, 100.0, direct);
    const auto b = fit_least_squares(X, y, 100.0, chunked);
    for (std::size_t k = 0; k < a.coefficients.size(); ++k)
        CHECK(a.coefficients[k] == doctest::Approx(b.coefficients[k]).epsilon(1e-6));
    CHECK(a.raw_risk == doctest::Approx(b.raw_risk).epsilon(1e-9));

    // rank-deficient design: duplicated column
    Eigen::MatrixXd D(X.rows(), 3);
    D << X.col(0), X.col(1), X.col(1);
    const auto d1 = fit_least_squares(D, y, 100.0, direct);
    const auto d2 = fit_least_squares(D, y, 100.0, chunked);
    CHECK(d1.rank == 2);
    CHECK(d2.raw_risk == doctest::Approx(d1.raw_risk).epsilon(1e-9));
}

TEST_CASE("least squares: skips non-finite targets and rejects empty data") {
    const std::vector<std::vector<double>> rows{{1.0}, {1.0}, {1.0}};
    const std::vector<double> y{1.0, NAN, 3.0};
    const auto fit = fit_least_squares(rows, y, 10.0);
    CHECK(fit.samples == 2);
    CHECK(fit.coefficients[0] == doctest::Approx(2.0));
    const std::vector<double> none{NAN, NAN, INFINITY};
    CHECK_THROWS_AS(fit_least_squares(rows, none, 10.0), DataError);
}
