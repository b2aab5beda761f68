#include <doctest.h>

#include <cmath>

#include "dtstop/errors.hpp"
#include "dtstop/structures.hpp"
#include "oracles.hpp"

using namespace dtstop;

namespace {

std::vector<Increment> skeleton(double eps, std::uint64_t seed, double horizon = 1.0) {
    Stream s(seed, StreamPurpose::skeleton, 0);
    return sample_path(SkeletonConfig{eps, 1, horizon, seed}, s).increments;
}

SdeCoefficients constant_coefficients(double a, double b, double x0) {
    SdeCoefficients c;
    c.name = "const";
    c.drift = [a](double, const StoppedPath&) { return a; };
    c.diffusion = [b](double, const StoppedPath&) { return b; };
    c.x0 = x0;
    return c;
}

}  // namespace

TEST_CASE("euler_step special cases") {
    const double eps = 0.25;
    const auto h = skeleton(eps, 3);
    const auto zero = euler_path(make_coefficients("zero", {{"x0", 2.0}}), h, eps);
    for (double v : zero.values) CHECK(v == 2.0);

    const auto walk = euler_path(constant_coefficients(0.0, 1.0, 0.5), h, eps);
    double sum = 0.5;
    for (std::size_t m = 0; m < h.size(); ++m) {
        sum += eps * h[m].mark.sign;
        CHECK(walk.values[m + 1] == doctest::Approx(sum).epsilon(1e-14));
    }

    const auto drift = euler_path(constant_coefficients(1.0, 0.0, 0.5), h, eps);
    for (std::size_t m = 0; m < drift.values.size(); ++m)
        CHECK(drift.values[m] == doctest::Approx(0.5 + drift.epochs[m]).epsilon(1e-12));

    StatePath prior{{0.0}, {1.0}};
    CHECK(euler_step(constant_coefficients(2.0, 3.0, 1.0), prior, {0.1, {1, -1.0}}, 0.5) ==
          doctest::Approx(1.0 + 0.2 - 1.5));
}

TEST_CASE("path-dependent coefficients are non-anticipative") {
    const double eps = 0.25;
    const auto coeffs = make_coefficients("pathdep_vol", {{"x0", 0.3}});
    auto h = skeleton(eps, 7);
    const auto base = euler_path(coeffs, h, eps);
    const std::size_t cut = h.size() / 2;
    for (std::size_t m = cut; m < h.size(); ++m) {
        h[m].mark.sign = -h[m].mark.sign;
        h[m].dt *= 1.7;
    }
    const auto moved = euler_path(coeffs, h, eps);
    for (std::size_t m = 0; m <= cut; ++m) CHECK(moved.values[m] == base.values[m]);
}

TEST_CASE("reward_path") {
    const double eps = 0.25;
    const auto h = skeleton(eps, 5);
    const auto state = euler_path(make_coefficients("random_walk", {{"x0", 1.0}}), h, eps);

    const auto c = reward_path(make_payoff("constant", {{"c", 2.5}}), state, 1.0);
    for (double z : c.values) CHECK(z == 2.5);

    const auto id = reward_path(make_payoff("identity"), state, 1.0);
    REQUIRE(state.epochs[id.n_T] <= 1.0);
    if (id.n_T + 1 < state.epochs.size()) CHECK(state.epochs[id.n_T + 1] > 1.0);
    for (std::size_t j = 0; j < id.values.size(); ++j) CHECK(id.values[j] == state.values[std::min(j, id.n_T)]);

    // falling path below the strike
    StatePath falling;
    for (int m = 0; m <= 8; ++m) {
        falling.epochs.push_back(0.1 * m);
        falling.values.push_back(0.9 - 0.05 * m);
    }
    const auto put = reward_path(make_payoff("put", {{"K", 1.0}}), falling, 0.5);
    for (std::size_t j = 1; j <= put.n_T; ++j) CHECK(put.values[j] >= put.values[j - 1]);
    for (std::size_t j = put.n_T; j < put.values.size(); ++j) CHECK(put.values[j] == put.values[put.n_T]);
}

TEST_CASE("EulerStructure agrees with euler_path + reward_path") {
    const double eps = 0.5;
    const auto coeffs = make_coefficients("geometric", {{"x0", 1.0}, {"r", 0.06}, {"nu", 0.2}});
    const auto reward = make_payoff("put", {{"K", 1.0}, {"r", 0.06}});
    const EulerStructure structure(coeffs, reward, eps, 1.0);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto h = skeleton(eps, seed);
        const auto direct = reward_path(reward, euler_path(coeffs, h, eps), 1.0);
        const auto walked = structure.payoffs(h);
        REQUIRE(walked.size() == direct.values.size());
        for (std::size_t j = 0; j < walked.size(); ++j) CHECK(walked[j] == doctest::Approx(direct.values[j]).epsilon(1e-13));
    }
}

TEST_CASE("payoff bound is enforced and factories reject unknown parameters") {
    CHECK_THROWS(make_payoff("put", {{"strike", 1.0}}));
    CHECK_THROWS(make_coefficients("geometric", {{"sigma", 1.0}}));
    CHECK_THROWS(make_payoff("nope"));

    auto bad = make_payoff("identity");
    bad.sup_bound = 0.1;
    const EulerStructure structure(make_coefficients("random_walk", {{"x0", 0.0}}), bad, 0.5, 1.0);
    bool threw = false;
    for (std::uint64_t seed = 1; seed <= 10 && !threw; ++seed) {
        try {
            structure.payoffs(skeleton(0.5, seed));
        } catch (const CoefficientError&) {
            threw = true;
        }
    }
    CHECK(threw);
}

TEST_CASE("HistoryStructure freezes past the horizon") {
    const HistoryStructure s("index", [](History h, double) { return double(h.size()); }, 0.5, 2, 1.0);
    Stream stream(2, StreamPurpose::skeleton, 0);
    const auto path = sample_path(SkeletonConfig{0.5, 2, 1.0, 2}, stream);
    const auto z = s.payoffs(path.increments);
    const auto ep = path.epochs();
    double last = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
        if (ep[j] <= 1.0) {
            CHECK(z[j] == double(j));
            last = z[j];
        } else {
            CHECK(z[j] == last);
        }
    }
}

TEST_CASE("PathState rewind restores the walk") {
    const EulerStructure s(make_coefficients("pathdep_vol", {{"x0", 0.1}}), make_payoff("running_max"), 0.5, 1.0);
    const auto h = skeleton(0.5, 9);
    PathState a;
    s.reset(a);
    s.push(a, h[0]);
    const auto cp = a.checkpoint();
    for (std::size_t m = 1; m < h.size(); ++m) s.push(a, h[m]);
    a.rewind(cp);
    for (std::size_t m = 1; m < h.size(); ++m) s.push(a, h[m]);
    const PathState b = s.walk(h);
    CHECK(a.values == b.values);
    CHECK(a.payoffs == b.payoffs);
}

TEST_CASE("coupled skeleton at the fine level is the walk itself") {
    Stream stream(4, StreamPurpose::coupling, 0);
    const double delta = 0.05;
    const auto walk = fine_walk(delta, 0.5, stream);
    const auto inc = coupled_skeleton(walk, delta);
    REQUIRE(inc.size() == walk.steps.size());
    for (std::size_t i = 0; i < inc.size(); ++i) {
        CHECK(inc[i].dt == doctest::Approx(delta * delta));
        CHECK(inc[i].mark.sign == double(walk.steps[i]));
    }
    CHECK_THROWS(coupled_skeleton(walk, 0.07));
}

TEST_CASE("structure_convergence_check") {
    const auto put = make_payoff("bounded_put", {{"K", 1.0}});
    const auto zero = make_coefficients("zero", {{"x0", 0.7}});
    for (const auto& level : structure_convergence_check(put, zero, {0.25, 0.125}, 20, 1.0, 1)) {
        CHECK(level.mean_distance == 0.0);
        for (double x : level.distances) CHECK(x == 0.0);
    }

    const auto rw = make_coefficients("random_walk", {{"x0", 1.0}});
    int decreasing = 0;
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
        const auto levels = structure_convergence_check(put, rw, {0.25, 1.0 / 16}, 40, 1.0, 100 + rep);
        for (const auto& l : levels)
            for (double x : l.distances) CHECK(x >= 0.0);
        decreasing += levels[1].mean_distance < levels[0].mean_distance;
    }
    CHECK(decreasing >= 18);
}
