// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset, e.g. `acceptance 1 2 9`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "dtstop/binomial.hpp"
#include "dtstop/bounds.hpp"
#include "dtstop/cli.hpp"
#include "dtstop/kernel.hpp"
#include "dtstop/oracle.hpp"
#include "dtstop/parallel.hpp"
#include "dtstop/probe.hpp"
#include "dtstop/regression.hpp"
#include "dtstop/solver.hpp"
#include "oracles.hpp"

using namespace dtstop;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::shared_ptr<RewardStructure> walk_put(double eps, double K, double r) {
    return std::make_shared<EulerStructure>(make_coefficients("random_walk", {{"x0", 1.0}}),
                                            make_payoff("bounded_put", {{"K", K}, {"r", r}}), eps, 1.0);
}

// Small instance shared by criteria 5 and 6: four periods, discounted bounded put.
constexpr double kSmallEps = 0.5;
std::shared_ptr<RewardStructure> small_instance() { return walk_put(kSmallEps, 1.0, 6.0); }

LsConfig small_ls(std::size_t paths, std::uint64_t seed) {
    LsConfig c;
    c.structure = small_instance();
    c.skeleton = SkeletonConfig{kSmallEps, 1, 1.0, seed};
    c.paths = paths;
    c.degree_policy = DegreePolicy::fixed;
    c.degree = 6;
    return c;
}

double small_oracle_value() {
    static const double v = Oracle(small_instance(), OracleOptions{32}).value();
    return v;
}

// 1. Resolution planner.
Outcome plan_reproduction() {
    const auto a = plan_resolution(0.45, 0.2);
    const auto b = plan_resolution(0.3, 0.2);
    const bool ok = std::abs(a.k_star - 2.88) <= 0.01 && a.periods == 55 && std::abs(b.k_star - 4.35) <= 0.01 &&
                    b.periods == 416;
    return {ok, fmt("k*=%.4f e=%zu; k*=%.4f e=%zu", a.k_star, a.periods, b.k_star, b.periods)};
}

// 2. Exit-time law.
Outcome exit_time_battery() {
    const double eps = 0.5, e2 = eps * eps;
    const ExitTimeDistribution dist(eps);
    boost::math::quadrature::exp_sinh<double> tail;
    auto gk = [](auto f, double a, double b) {
        return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, 1e-14);
    };
    // split at eps^2 so the near-zero layer gets its own panel
    const double mass = gk([&](double t) { return dist.density(t); }, 0.0, e2) +
                        tail.integrate([&](double t) { return dist.density(t); }, e2, INFINITY);
    const double mean = gk([&](double t) { return t * dist.density(t); }, 0.0, e2) +
                        tail.integrate([&](double t) { return t * dist.density(t); }, e2, INFINITY);

    // fine-step walk: spatial step eps/64
    const std::size_t n = 1'000'000;
    std::vector<double> walk(n);
    std::mt19937_64 rng(20240601);
    for (auto& t : walk) t = oracles::walk_exit_time(eps, 64, rng);
    const auto ms = oracles::mean_se(walk);

    const double x = dist.options().switch_point;
    const auto s = ExitTimeDistribution::spectral_series(x, 1e-15);
    const auto r = ExitTimeDistribution::reflection_series(x, 1e-15);
    const double branch = std::max({std::abs(s.survival - r.survival) / std::abs(s.survival),
                                    std::abs(s.cdf - r.cdf) / std::abs(s.cdf),
                                    std::abs(s.density - r.density) / std::abs(s.density)});

    std::vector<double> draws(n);
    Stream stream(99, StreamPurpose::validation, 0);
    for (auto& t : draws) t = dist.sample(stream);
    const double D = oracles::ks_statistic(draws, [&](double t) { return dist.cdf(t); });
    const double crit = oracles::ks_critical(double(n), 0.01);

    const bool ok = std::abs(mass - 1.0) <= 1e-8 && std::abs(mean - e2) <= 1e-8 &&
                    std::abs(ms.mean - e2) <= 3.0 * ms.se && branch <= 1e-10 && D < crit;
    return {ok, fmt("mass-1=%.2e mean-eps2=%.2e walk=%.6f+-%.6f branch=%.2e KS=%.2e<%.2e", mass - 1.0, mean - e2,
                    ms.mean, ms.se, branch, D, crit)};
}

// 3. Transition kernel.
std::vector<Increment> random_history(double eps, int d, std::uint64_t index) {
    Stream stream(31, StreamPurpose::validation, index);
    auto path = sample_path(SkeletonConfig{eps, d, 1.0, 31}, stream).increments;
    const std::size_t len = 1 + static_cast<std::size_t>(stream.bits() % 6);
    path.resize(std::min(len, path.size()));
    return path;
}

struct KernelCheck {
    double chi = 0.0;
    double critical = 0.0;
    double mass = 0.0;
    bool symmetric = true;
};

KernelCheck kernel_check(const TransitionKernel& k, History h, std::size_t sims, std::uint64_t seed) {
    const int d = k.dim();
    const double e2 = k.exit_time().epsilon() * k.exit_time().epsilon();
    const auto stats = history_stats(h, d);
    KernelCheck out;

    std::vector<double> edges;
    for (double q : {0.0, 0.03, 0.07, 0.12, 0.2, 0.3, 0.45, 0.65, 0.9, 1.3, 2.0}) edges.push_back(q * e2);
    edges.push_back(INFINITY);
    const std::size_t bins = edges.size() - 1;
    // cells (bin, coordinate, sign)
    auto cell = [&](std::size_t b, int j, int s) { return (b * d + static_cast<std::size_t>(j - 1)) * 2 + (s > 0); };
    std::vector<double> probs(bins * d * 2);
    for (int j = 1; j <= d; ++j) {
        const double total_plus = k.transition_prob(stats, j, 1, 0.0, INFINITY);
        const double total_minus = k.transition_prob(stats, j, -1, 0.0, INFINITY);
        out.mass += total_plus + total_minus;
        out.symmetric = out.symmetric && total_plus == total_minus;
        for (double t : {0.01 * e2, 0.4 * e2, 3.0 * e2})
            out.symmetric = out.symmetric && k.transition_density(stats, j, 1, t) == k.transition_density(stats, j, -1, t);
        for (std::size_t b = 0; b < bins; ++b)
            for (int s : {-1, 1}) probs[cell(b, j, s)] = k.transition_prob(stats, j, s, edges[b], edges[b + 1]);
    }

    const ExitTimeDistribution& dist = k.exit_time();
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto draw = [&](std::mt19937_64& g) {
        double u;
        do u = unif(g);
        while (u <= 0.0);
        return dist.survival_quantile(u);
    };
    std::vector<double> counts(probs.size(), 0.0);
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < sims; ++i) {
        const auto nx = oracles::simulate_next(stats.age, draw, rng);
        const auto b = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), nx.dt) - edges.begin() - 1);
        counts[cell(b, nx.coordinate, nx.sign)] += 1.0;
    }

    // pool consecutive time bins until every expected count is at least 5; a
    // sparse remainder joins the last pooled bin
    const std::size_t width = static_cast<std::size_t>(d) * 2;
    std::vector<double> pc, cc;
    std::vector<double> accp(width, 0.0), accc(width, 0.0);
    auto sparse = [&](const std::vector<double>& p) { return *std::min_element(p.begin(), p.end()) * double(sims) < 5.0; };
    for (std::size_t b = 0; b < bins; ++b) {
        for (std::size_t c = 0; c < width; ++c) {
            accp[c] += probs[b * width + c];
            accc[c] += counts[b * width + c];
        }
        if (sparse(accp) && b + 1 < bins) continue;
        if (sparse(accp) && !pc.empty()) {
            for (std::size_t c = 0; c < width; ++c) {
                pc[pc.size() - width + c] += accp[c];
                cc[cc.size() - width + c] += accc[c];
            }
        } else {
            pc.insert(pc.end(), accp.begin(), accp.end());
            cc.insert(cc.end(), accc.begin(), accc.end());
        }
        std::fill(accp.begin(), accp.end(), 0.0);
        std::fill(accc.begin(), accc.end(), 0.0);
    }
    // normalise the tiny quadrature slack away so the statistic tests shape only
    double ptot = 0.0;
    for (double p : pc) ptot += p;
    for (double& p : pc) p /= ptot;
    out.chi = oracles::chi_square_statistic(cc, pc, double(sims));
    out.critical = oracles::chi_square_critical(double(pc.size() - 1), 0.01);
    return out;
}

Outcome kernel_correctness() {
    const double eps = 0.5;
    double worst1 = 0.0;
    const TransitionKernel k1(eps, 1);
    for (std::uint64_t i = 0; i < 10; ++i) {
        const auto h = random_history(eps, 1, i);
        const auto st = history_stats(h, 1);
        for (auto [a, b] : {std::pair{0.0, 0.02}, {0.02, 0.1}, {0.1, 0.4}, {0.4, double(INFINITY)}, {0.0, double(INFINITY)}})
            for (int s : {-1, 1}) {
                const double expect = 0.5 * (k1.exit_time().survival(a) - k1.exit_time().survival(b));
                worst1 = std::max(worst1, std::abs(k1.transition_prob(st, 1, s, a, b) - expect));
            }
    }

    std::size_t chi_fail = 0;
    double worst_mass = 0.0, worst_ratio = 0.0;
    bool symmetric = true;
    std::ostringstream where;
    auto run = [&](int d, std::size_t histories) {
        const TransitionKernel k(eps, d);
        for (std::uint64_t i = 0; i < histories; ++i) {
            const auto h = random_history(eps, d, 100 * d + i);
            const auto c = kernel_check(k, h, 1'000'000, 7000 + 100 * d + i);
            worst_mass = std::max(worst_mass, std::abs(c.mass - 1.0));
            worst_ratio = std::max(worst_ratio, c.chi / c.critical);
            symmetric = symmetric && c.symmetric;
            if (c.chi >= c.critical) {
                ++chi_fail;
                where << " d" << d << "#" << i;
            }
        }
    };
    run(2, 20);
    run(3, 5);
    const bool ok = worst1 <= 1e-8 && worst_mass <= 1e-6 && symmetric && chi_fail == 0;
    return {ok, fmt("d1 max err=%.2e; mass err=%.2e; symmetric=%d; chi/crit max=%.3f; failures=%zu%s", worst1,
                    worst_mass, int(symmetric), worst_ratio, chi_fail, where.str().c_str())};
}

// 4. Oracle integrity.
Outcome oracle_integrity() {
    struct Instance {
        std::string name;
        std::function<std::shared_ptr<RewardStructure>()> make;
    };
    const std::vector<Instance> instances{
        {"walk put e=4", [] { return small_instance(); }},
        {"walk put e=3", [] { return walk_put(0.6, 1.0, 6.0); }},
        {"geometric put e=3",
         [] {
             return std::make_shared<EulerStructure>(
                 make_coefficients("geometric", {{"x0", 1.0}, {"r", 0.06}, {"nu", 0.4}}),
                 make_payoff("bounded_put", {{"K", 1.1}, {"r", 0.06}}), 0.6, 1.0);
         }},
        {"pathdep running max e=3",
         [] {
             return std::make_shared<EulerStructure>(make_coefficients("pathdep_vol", {{"x0", 0.0}}),
                                                     make_payoff("running_max"), 0.6, 1.0);
         }},
        {"clock index e=2",
         [] {
             return std::make_shared<HistoryStructure>(
                 "index", [](History h, double) { return double(h.size()); }, std::sqrt(0.5), 1, 1.0);
         }},
        {"constant e=4",
         [] {
             return std::make_shared<EulerStructure>(make_coefficients("zero"), make_payoff("constant", {{"c", 0.3}}),
                                                     0.5, 1.0);
         }},
    };
    bool ok = true;
    std::ostringstream detail;
    for (const auto& inst : instances) {
        const auto s = inst.make();
        const Oracle o32(s, OracleOptions{32});
        const Oracle o48(s, OracleOptions{48});
        const auto rep = variational_check(o32);
        const double gap = std::abs(o48.value() - o32.value());
        const bool pass = rep.max_residual <= 1e-8 && rep.max_recursion_residual <= 1e-8 && gap <= 1e-7 &&
                          rep.terminal_residual == 0.0;
        ok = ok && pass;
        detail << "[" << inst.name << ": res=" << fmt("%.1e/%.1e", rep.max_residual, rep.max_recursion_residual)
               << " refine=" << fmt("%.1e", gap)
               << " terminal=" << rep.terminal_residual << "] ";
    }
    return {ok, detail.str()};
}

// 5. LS against the oracle on the small instance.
Outcome ls_oracle_equivalence() {
    const double v = small_oracle_value();
    const double L = *small_instance()->sup_bound();
    std::size_t passing = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto c = small_ls(100'000, seed);
        c.fresh_paths = 100'000;
        const auto r = ls_solve(c);
        const double err = std::abs(r.value - v);
        const double tol = 3.0 * r.lower_bound_se + 0.005 * L;
        passing += err <= tol;
        worst = std::max(worst, err / tol);
    }
    return {passing >= 18, fmt("oracle=%.8f L=%.1f passing=%zu/20 worst err/tol=%.3f", v, L, passing, worst)};
}

// 6. Convergence in N.
Outcome convergence_in_n() {
    const double v = small_oracle_value();
    const std::vector<std::size_t> sizes{1000, 4000, 16000, 64000};
    std::vector<double> mae;
    for (std::size_t n : sizes) {
        double sum = 0.0;
        for (std::uint64_t rep = 0; rep < 20; ++rep) {
            const auto r = ls_solve(small_ls(n, derive_seed(606, StreamPurpose::validation, rep)));
            sum += std::abs(r.value - v);
        }
        mae.push_back(sum / 20.0);
    }
    int inversions = 0;
    for (std::size_t i = 1; i < mae.size(); ++i) inversions += mae[i] >= mae[i - 1];
    return {inversions <= 1,
            fmt("mean |err| at N=1e3,4e3,1.6e4,6.4e4: %.2e %.2e %.2e %.2e; inversions=%d", mae[0], mae[1], mae[2],
                mae[3], inversions)};
}

// 7. American put benchmark.
Outcome american_put_benchmark() {
    BinomialPut put;
    put.steps = 10000;
    const double ref = american_put_crr(put);
    auto level = [&](int k, std::uint64_t seed) {
        const double eps = std::ldexp(1.0, -k);
        LsConfig c;
        c.structure = std::make_shared<EulerStructure>(
            make_coefficients("geometric", {{"x0", put.spot}, {"r", put.rate}, {"nu", put.volatility}}),
            make_payoff("put", {{"K", put.strike}, {"r", put.rate}}), eps, put.maturity);
        c.skeleton = SkeletonConfig{eps, 1, put.maturity, seed};
        c.paths = 200'000;
        c.compression = state_clock_hook(put.spot);
        c.degree_policy = DegreePolicy::fixed;
        c.degree = 12;
        c.bound_policy = BoundPolicy::constant;
        c.bound = put.strike;
        c.payoff_bound = put.strike;
        return ls_solve(c).value;
    };
    std::size_t within = 0, finer_no_worse = 0;
    double worst_rel = 0.0, fine_sum = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const std::uint64_t seed = derive_seed(707, StreamPurpose::validation, s);
        const double fine = level(4, seed);
        const double coarse = level(3, seed);
        const double rel = std::abs(fine - ref) / ref;
        worst_rel = std::max(worst_rel, rel);
        fine_sum += fine;
        within += rel <= 0.05;
        finer_no_worse += std::abs(fine - ref) <= std::abs(coarse - ref);
    }
    return {within == 20 && finer_no_worse >= 15,
            fmt("tree=%.5f mean V_hat=%.5f worst rel err=%.4f within 5%%: %zu/20 finer no worse: %zu/20", ref,
                fine_sum / 20.0, worst_rel, within, finer_no_worse)};
}

// 8. Regularity probe.
Outcome regularity_probe() {
    auto s = std::make_shared<EulerStructure>(make_coefficients("geometric", {{"x0", 1.0}, {"r", 0.06}, {"nu", 0.4}}),
                                              make_payoff("bounded_put", {{"K", 1.1}, {"r", 0.06}}), 0.6, 1.0);
    const Oracle o(s, OracleOptions{32});
    const SkeletonConfig sk{0.6, 1, 1.0, 808};
    ProbeOptions opts;
    opts.scales = {1e-2, 1e-3, 1e-4};
    bool ok = o.periods() == 3;
    std::ostringstream detail;
    for (std::size_t j : {1, 2}) {
        const auto probe = lipschitz_probe([&](History h) { return o.continuation(h); }, sk, j, opts);
        const double ratio = probe[1].max_ratio / probe[0].max_ratio;
        ok = ok && ratio >= 0.5 && ratio <= 2.0;
        detail << fmt("j=%zu max ratio %.4g / %.4g / %.4g (1e-3 vs 1e-2: %.3f) ", j, probe[0].max_ratio,
                      probe[1].max_ratio, probe[2].max_ratio, ratio);
    }
    return {ok, detail.str()};
}

// 9. Regression properties.
Outcome regression_properties() {
    std::mt19937_64 rng(909);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst_margin = INFINITY, worst_interp = 0.0;
    for (int inst = 0; inst < 50; ++inst) {
        const std::size_t m = 1 + rng() % 3;
        const int degree = 1 + static_cast<int>(rng() % 3);
        const std::size_t N = 50 + rng() % 450;
        const MonomialBasis basis(m, degree);
        Eigen::MatrixXd X(N, basis.size());
        std::vector<double> x(m);
        for (std::size_t i = 0; i < N; ++i) {
            for (auto& v : x) v = u(rng);
            const auto row = basis.evaluate(x);
            for (std::size_t k = 0; k < row.size(); ++k) X(i, k) = row[k];
        }
        std::vector<double> y(N);
        for (auto& v : y) v = u(rng) + X(static_cast<Eigen::Index>(&v - y.data()), 0);
        const auto fit = fit_least_squares(X, y, 1e6);
        for (int cand = 0; cand < 100; ++cand) {
            std::vector<double> c(X.cols());
            // half far away, half near the optimum
            const double spread = cand % 2 ? 1.0 : 1e-4;
            for (std::size_t k = 0; k < c.size(); ++k) c[k] = (cand % 2 ? 0.0 : fit.coefficients[k]) + spread * u(rng);
            worst_margin = std::min(worst_margin, empirical_risk(X, y, c, 1e6) - fit.raw_risk);
        }
        Eigen::VectorXd coef = Eigen::VectorXd::Random(X.cols()) * 0.1;
        const Eigen::VectorXd t = X * coef;
        const auto interp = fit_least_squares(X, std::vector<double>(t.data(), t.data() + t.size()), 1e6);
        worst_interp = std::max(worst_interp, interp.raw_risk);
    }
    bool idempotent = true;
    std::normal_distribution<double> n(0.0, 3.0);
    for (int i = 0; i < 10000; ++i) {
        const double v = n(rng), b = 0.1 + std::abs(n(rng));
        idempotent = idempotent && truncate(truncate(v, b), b) == truncate(v, b);
    }
    return {worst_margin >= -1e-10 && worst_interp <= 1e-18 && idempotent,
            fmt("min margin=%.2e max interpolation risk=%.2e idempotent=%d", worst_margin, worst_interp,
                int(idempotent))};
}

// 10. Reproducibility across thread counts.
Outcome reproducibility() {
    std::vector<RunConfig> configs(2);
    configs[0].command = "solve";
    configs[0].epsilon = 0.5;
    configs[0].coefficient_params = {{"x0", 1.0}};
    configs[0].payoff_params = {{"K", 1.0}, {"r", 6.0}};
    configs[0].paths = 30000;
    configs[0].fresh_paths = 30000;
    configs[0].seed = 1010;
    configs[1] = configs[0];
    configs[1].command = "converge";
    configs[1].epsilon = 0.6;
    configs[1].sweep_paths = {2000, 8000};
    configs[1].replications = 3;
    configs[1].nodes = 16;
    bool ok = true;
    std::ostringstream detail;
    for (const auto& c : configs) {
        std::ostringstream sink;
        auto a = run(c, sink, 1, false);
        auto b = run(c, sink, 8, false);
        const bool values = c.command != "solve" ||
                            a["results"]["V_hat"].get<double>() == b["results"]["V_hat"].get<double>();
        a.erase("execution");
        b.erase("execution");
        const bool same = values && a == b;
        ok = ok && same;
        detail << c.command << ": " << (same ? "identical" : "DIFFERENT") << "; ";
    }
    set_thread_count(1);
    return {ok, detail.str()};
}

struct Criterion {
    int id;
    const char* name;
    double budget_s;  // 0 when the criterion states no runtime limit
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {1, "plan reproduction", 1.0, plan_reproduction},
        {2, "exit-time battery", 120.0, exit_time_battery},
        {3, "kernel correctness", 900.0, kernel_correctness},
        {4, "oracle integrity", 0.0, oracle_integrity},
        {5, "LS vs oracle", 600.0, ls_oracle_equivalence},
        {6, "convergence in N", 1200.0, convergence_in_n},
        {7, "American put benchmark", 1800.0, american_put_benchmark},
        {8, "regularity probe", 0.0, regularity_probe},
        {9, "regression properties", 0.0, regression_properties},
        {10, "reproducibility", 0.0, reproducibility},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    set_thread_count(1);
    int failures = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && !selected.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = seconds_since(t0);
        const bool in_time = c.budget_s == 0.0 || secs < c.budget_s;
        if (!in_time) o.detail += fmt(" [over the %.0f s budget]", c.budget_s);
        const bool pass = o.pass && in_time;
        failures += !pass;
        std::printf("%s %2d %-24s %s (%.1f s)\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
