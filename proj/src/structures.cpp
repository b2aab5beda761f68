#include "dtstop/structures.hpp"

#include <cmath>
#include <set>
#include <utility>

#include "dtstop/errors.hpp"
#include "dtstop/parallel.hpp"

namespace dtstop {

namespace {

double param(const Parameters& params, const std::string& key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

void require_known(const Parameters& params, const std::set<std::string>& known, const std::string& what) {
    for (const auto& [key, value] : params)
        if (!known.count(key)) throw DomainError(what + ": unknown parameter '" + key + "'");
}

double discount(double r, double t) { return r == 0.0 ? 1.0 : std::exp(-r * t); }

// Exit indices (in fine steps) of a walk from bands of half-width m around the last crossing level.
std::vector<std::pair<std::size_t, int>> crossings(const FineWalk& walk, long m) {
    std::vector<std::pair<std::size_t, int>> out;
    long pos = 0;
    long level = 0;
    for (std::size_t i = 0; i < walk.steps.size(); ++i) {
        pos += walk.steps[i];
        if (pos - level == m || level - pos == m) {
            out.emplace_back(i + 1, pos > level ? 1 : -1);
            level = pos;
        }
    }
    return out;
}

long band_units(const FineWalk& walk, double epsilon) {
    const double ratio = epsilon / walk.delta;
    const long m = std::lround(ratio);
    if (m < 1 || std::abs(ratio - static_cast<double>(m)) > 1e-9 * ratio)
        throw DomainError("coupled skeleton: epsilon must be an integer multiple of the walk step");
    return m;
}

}  // namespace

double StoppedPath::at(double t) const {
    const auto it = std::upper_bound(epochs.begin(), epochs.end(), t);
    if (it == epochs.begin()) return values.front();
    return values[static_cast<std::size_t>(it - epochs.begin()) - 1];
}

StoppedPath stopped_view(std::span<const double> epochs, std::span<const double> values) {
    if (values.empty() || epochs.size() != values.size()) throw ShapeError("stopped_view: need matching nonempty spans");
    StoppedPath view{epochs, values, values.front(), values.front()};
    for (double v : values) {
        view.running_max = std::max(view.running_max, v);
        view.running_min = std::min(view.running_min, v);
    }
    return view;
}

SdeCoefficients make_coefficients(const std::string& name, const Parameters& params) {
    SdeCoefficients c;
    c.name = name;
    c.x0 = param(params, "x0", name == "geometric" ? 1.0 : 0.0);
    if (name == "zero") {
        require_known(params, {"x0"}, name);
        c.drift = [](double, const StoppedPath&) { return 0.0; };
        c.diffusion = [](double, const StoppedPath&) { return 0.0; };
    } else if (name == "random_walk") {
        require_known(params, {"x0", "mu", "sigma"}, name);
        const double mu = param(params, "mu", 0.0);
        const double sigma = param(params, "sigma", 1.0);
        c.drift = [mu](double, const StoppedPath&) { return mu; };
        c.diffusion = [sigma](double, const StoppedPath&) { return sigma; };
    } else if (name == "geometric") {
        require_known(params, {"x0", "r", "nu"}, name);
        const double r = param(params, "r", 0.0);
        const double nu = param(params, "nu", 0.2);
        c.drift = [r](double, const StoppedPath& w) { return r * w.current(); };
        c.diffusion = [nu](double, const StoppedPath& w) { return nu * w.current(); };
        c.lipschitz = std::max(std::abs(r), std::abs(nu));
    } else if (name == "pathdep_vol") {
        require_known(params, {"x0", "mu"}, name);
        const double mu = param(params, "mu", 0.0);
        c.drift = [mu](double, const StoppedPath&) { return mu; };
        c.diffusion = [](double, const StoppedPath& w) { return 0.2 + 0.1 * std::min(1.0, w.sup_abs()); };
        c.lipschitz = 0.1;
    } else {
        throw DomainError("unknown coefficient set '" + name + "'");
    }
    return c;
}

RewardFunctional make_payoff(const std::string& name, const Parameters& params) {
    RewardFunctional F;
    F.name = name;
    if (name == "constant") {
        require_known(params, {"c"}, name);
        const double c = param(params, "c", 1.0);
        F.evaluate = [c](double, const StoppedPath&) { return c; };
        F.sup_bound = std::abs(c);
        F.lipschitz = 0.0;
    } else if (name == "put" || name == "bounded_put") {
        require_known(params, {"K", "r"}, name);
        const double K = param(params, "K", 1.0);
        const double r = param(params, "r", 0.0);
        if (name == "put") {
            F.evaluate = [K, r](double t, const StoppedPath& w) {
                return discount(r, t) * std::max(K - w.current(), 0.0);
            };
        } else {
            F.evaluate = [K, r](double t, const StoppedPath& w) {
                return discount(r, t) * std::min(K, std::max(K - w.current(), 0.0));
            };
            F.sup_bound = std::abs(K);
            F.lipschitz = 1.0 + std::abs(r * K);
        }
    } else if (name == "running_max") {
        require_known(params, {}, name);
        F.evaluate = [](double, const StoppedPath& w) { return w.running_max; };
        F.lipschitz = 1.0;
    } else if (name == "identity") {
        require_known(params, {}, name);
        F.evaluate = [](double, const StoppedPath& w) { return w.current(); };
        F.lipschitz = 1.0;
    } else {
        throw DomainError("unknown payoff '" + name + "'");
    }
    return F;
}

double euler_step(const SdeCoefficients& coeffs, const StatePath& prior, const Increment& inc, double epsilon) {
    const StoppedPath view = stopped_view(prior.epochs, prior.values);
    const double t = prior.epochs.back();
    const double a = coeffs.drift(t, view);
    const double s = coeffs.diffusion(t, view);
    if (!std::isfinite(a) || !std::isfinite(s)) throw CoefficientError("euler_step: non-finite coefficient");
    const double dA = inc.mark.coordinate == 1 ? epsilon * inc.mark.sign : 0.0;
    return view.current() + a * inc.dt + s * dA;
}

StatePath euler_path(const SdeCoefficients& coeffs, History skeleton, double epsilon) {
    StatePath path{{0.0}, {coeffs.x0}};
    path.epochs.reserve(skeleton.size() + 1);
    path.values.reserve(skeleton.size() + 1);
    for (const auto& inc : skeleton) {
        const double h = euler_step(coeffs, path, inc, epsilon);
        path.epochs.push_back(path.epochs.back() + inc.dt);
        path.values.push_back(h);
    }
    return path;
}

PayoffSequence reward_path(const RewardFunctional& F, const StatePath& state, double horizon) {
    PayoffSequence out;
    const std::span<const double> epochs(state.epochs);
    const std::span<const double> values(state.values);
    for (std::size_t j = 0; j < state.values.size(); ++j) {
        if (state.epochs[j] > horizon) {
            out.values.push_back(out.values.back());
            continue;
        }
        const auto view = stopped_view(epochs.first(j + 1), values.first(j + 1));
        const double z = F.evaluate(state.epochs[j], view);
        if (!std::isfinite(z)) throw CoefficientError("reward_path: non-finite payoff");
        out.values.push_back(z);
        out.n_T = j;
    }
    return out;
}

RewardStructure::RewardStructure(double epsilon, int dim, double horizon)
    : epsilon_(epsilon), dim_(dim), horizon_(horizon) {
    SkeletonConfig{epsilon, dim, horizon, 0}.validate();
}

void RewardStructure::check_payoff(double z) const {
    if (!std::isfinite(z)) throw CoefficientError("payoff evaluated to a non-finite value");
    const auto bound = sup_bound();
    if (bound && std::abs(z) > *bound * (1.0 + 1e-12))
        throw CoefficientError("payoff " + std::to_string(z) + " exceeds its declared bound");
}

void RewardStructure::reset(PathState& state) const {
    state.increments.clear();
    state.epochs.assign(1, 0.0);
    const double h = initial_value();
    state.values.assign(1, h);
    state.running_max = h;
    state.running_min = h;
    state.payoffs.clear();
    state.n_T = 0;
    state.frozen = false;
    const double z = payoff(state);
    check_payoff(z);
    state.payoffs.push_back(z);
}

void RewardStructure::push(PathState& state, const Increment& inc) const {
    if (!(inc.dt > 0.0)) throw InvalidHistory("structure: dt must be positive");
    const double epoch = state.epochs.back() + inc.dt;
    if (state.frozen || (epoch > horizon_ && freezes())) {
        state.frozen = true;
        state.increments.push_back(inc);
        state.epochs.push_back(epoch);
        state.values.push_back(state.values.back());
        state.payoffs.push_back(state.payoffs.back());
        return;
    }
    const double h = next_value(state, inc);
    if (!std::isfinite(h)) throw CoefficientError("structure: state evaluated to a non-finite value");
    state.increments.push_back(inc);
    state.epochs.push_back(epoch);
    state.values.push_back(h);
    state.running_max = std::max(state.running_max, h);
    state.running_min = std::min(state.running_min, h);
    const double z = payoff(state);
    check_payoff(z);
    state.payoffs.push_back(z);
    state.n_T = state.steps();
}

void PathState::rewind(const Checkpoint& c) {
    increments.resize(c.steps);
    epochs.resize(c.steps + 1);
    values.resize(c.steps + 1);
    payoffs.resize(c.steps + 1);
    running_max = c.running_max;
    running_min = c.running_min;
    n_T = c.n_T;
    frozen = c.frozen;
}

PathState RewardStructure::walk(History history) const {
    PathState state;
    state.increments.reserve(history.size());
    reset(state);
    for (const auto& inc : history) push(state, inc);
    return state;
}

std::vector<double> RewardStructure::payoffs(History history) const { return walk(history).payoffs; }

EulerStructure::EulerStructure(SdeCoefficients coeffs, RewardFunctional reward, double epsilon, double horizon)
    : RewardStructure(epsilon, 1, horizon), coeffs_(std::move(coeffs)), reward_(std::move(reward)) {
    if (!coeffs_.drift || !coeffs_.diffusion || !reward_.evaluate)
        throw DomainError("EulerStructure: coefficients and payoff must be set");
}

double EulerStructure::next_value(const PathState& state, const Increment& inc) const {
    const StoppedPath view{state.epochs, state.values, state.running_max, state.running_min};
    const double t = state.epochs.back();
    const double a = coeffs_.drift(t, view);
    const double s = coeffs_.diffusion(t, view);
    if (!std::isfinite(a) || !std::isfinite(s)) throw CoefficientError("euler: non-finite coefficient");
    const double dA = inc.mark.coordinate == 1 ? epsilon() * inc.mark.sign : 0.0;
    return view.current() + a * inc.dt + s * dA;
}

double EulerStructure::payoff(const PathState& state) const {
    const StoppedPath view{state.epochs, state.values, state.running_max, state.running_min};
    return reward_.evaluate(state.epochs.back(), view);
}

HistoryStructure::HistoryStructure(std::string name, Functional payoff, double epsilon, int dim, double horizon,
                                   std::optional<double> sup_bound, bool freeze)
    : RewardStructure(epsilon, dim, horizon),
      name_(std::move(name)),
      payoff_(std::move(payoff)),
      bound_(sup_bound),
      freeze_(freeze) {}

double HistoryStructure::payoff(const PathState& state) const {
    return payoff_(History(state.increments), state.epochs.back());
}

FineWalk fine_walk(double delta, double horizon, Stream& stream) {
    if (!(delta > 0.0) || !(horizon > 0.0)) throw DomainError("fine_walk: delta and horizon must be positive");
    const auto n = static_cast<std::size_t>(std::ceil(horizon / (delta * delta)));
    FineWalk walk{delta, std::vector<std::int8_t>(n)};
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i % 64 == 0) bits = stream.bits();
        walk.steps[i] = (bits >> (i % 64)) & 1U ? 1 : -1;
    }
    return walk;
}

std::vector<Increment> coupled_skeleton(const FineWalk& walk, double epsilon) {
    const long m = band_units(walk, epsilon);
    const double tick = walk.delta * walk.delta;
    std::vector<Increment> out;
    std::size_t last = 0;
    for (const auto& [index, sign] : crossings(walk, m)) {
        out.push_back({static_cast<double>(index - last) * tick, Mark{1, static_cast<double>(sign)}});
        last = index;
    }
    return out;
}

StatePath fine_euler(const SdeCoefficients& coeffs, const FineWalk& walk) {
    const std::size_t n = walk.steps.size();
    const double tick = walk.delta * walk.delta;
    StatePath path;
    path.epochs.reserve(n + 1);
    path.values.reserve(n + 1);
    path.epochs.push_back(0.0);
    path.values.push_back(coeffs.x0);
    double hi = coeffs.x0;
    double lo = coeffs.x0;
    for (std::size_t i = 0; i < n; ++i) {
        const StoppedPath view{path.epochs, path.values, hi, lo};
        const double t = path.epochs.back();
        const double a = coeffs.drift(t, view);
        const double s = coeffs.diffusion(t, view);
        if (!std::isfinite(a) || !std::isfinite(s)) throw CoefficientError("fine_euler: non-finite coefficient");
        const double x = view.current() + a * tick + s * walk.delta * walk.steps[i];
        path.epochs.push_back(static_cast<double>(i + 1) * tick);
        path.values.push_back(x);
        hi = std::max(hi, x);
        lo = std::min(lo, x);
    }
    return path;
}

std::vector<ConvergenceLevel> structure_convergence_check(const RewardFunctional& F, const SdeCoefficients& coeffs,
                                                          const std::vector<double>& epsilons, std::size_t n_paths,
                                                          double horizon, std::uint64_t seed) {
    if (epsilons.size() < 2) throw DomainError("structure_convergence_check: need at least two levels");
    if (n_paths < 2) throw DomainError("structure_convergence_check: need at least two paths");
    const double eps_min = *std::min_element(epsilons.begin(), epsilons.end());
    const double delta = eps_min / 10.0;
    const std::size_t levels = epsilons.size();
    std::vector<std::vector<double>> dist(levels, std::vector<double>(n_paths, 0.0));

    parallel_for(n_paths, [&](std::size_t p) {
        Stream stream(seed, StreamPurpose::coupling, p);
        const FineWalk walk = fine_walk(delta, horizon, stream);
        const StatePath ref = fine_euler(coeffs, walk);
        const double tick = delta * delta;
        std::size_t last_fine = walk.steps.size();
        while (last_fine > 0 && static_cast<double>(last_fine) * tick > horizon * (1.0 + 1e-12)) --last_fine;

        // Reference payoff on the fine grid.
        std::vector<double> zref(last_fine + 1);
        double hi = ref.values[0];
        double lo = ref.values[0];
        for (std::size_t i = 0; i <= last_fine; ++i) {
            hi = std::max(hi, ref.values[i]);
            lo = std::min(lo, ref.values[i]);
            const StoppedPath view{std::span<const double>(ref.epochs).first(i + 1),
                                   std::span<const double>(ref.values).first(i + 1), hi, lo};
            zref[i] = F.evaluate(ref.epochs[i], view);
        }

        for (std::size_t l = 0; l < levels; ++l) {
            const double eps = epsilons[l];
            const long m = band_units(walk, eps);
            const std::size_t e = num_periods(SkeletonConfig{eps, 1, horizon, seed});
            auto cross = crossings(walk, m);
            if (cross.size() > e) cross.resize(e);

            const EulerStructure structure(coeffs, F, eps, horizon);
            PathState state;
            structure.reset(state);
            std::size_t prev = 0;
            for (const auto& [index, sign] : cross) {
                if (static_cast<double>(index) * tick > horizon) break;
                structure.push(state, {static_cast<double>(index - prev) * tick, Mark{1, static_cast<double>(sign)}});
                prev = index;
            }

            double worst = 0.0;
            std::size_t node = 0;
            for (std::size_t i = 0; i <= last_fine; ++i) {
                while (node < state.steps() && cross[node].first <= i) ++node;
                worst = std::max(worst, std::abs(state.payoffs[node] - zref[i]));
            }
            dist[l][p] = worst;
        }
    });

    std::vector<ConvergenceLevel> out;
    for (std::size_t l = 0; l < levels; ++l) {
        double mean = 0.0;
        for (double v : dist[l]) mean += v;
        mean /= static_cast<double>(n_paths);
        double var = 0.0;
        for (double v : dist[l]) var += (v - mean) * (v - mean);
        var /= static_cast<double>(n_paths - 1);
        out.push_back({epsilons[l], mean, std::sqrt(var / static_cast<double>(n_paths)), dist[l]});
    }
    return out;
}

}  // namespace dtstop
