#include "dtstop/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "dtstop/errors.hpp"
#include "dtstop/parallel.hpp"

namespace dtstop {

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

double apply_truncation(double z, const std::optional<double>& beta) { return beta ? truncate(z, *beta) : z; }

Estimate summarize(const std::vector<double>& values) {
    Estimate e;
    e.samples = values.size();
    if (values.empty()) return e;
    // shifted by the first sample so that constant data give an exact mean and zero spread
    const double shift = values.front();
    double sum = 0.0;
    for (double v : values) sum += v - shift;
    const double offset = sum / static_cast<double>(values.size());
    e.mean = shift + offset;
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - shift - offset) * (v - shift - offset);
        e.standard_error = std::sqrt(ss / static_cast<double>(values.size() - 1) / static_cast<double>(values.size()));
    }
    return e;
}

int step_degree(const LsConfig& config, const FeatureMap& map, std::size_t j) {
    if (map.inputs(j) == 0) return 0;
    if (config.degree_policy == DegreePolicy::fixed) return config.degree;
    return schedule_degree_for_inputs(config.paths, map.inputs(j));
}

}  // namespace

FeatureHook state_clock_hook(double x_ref) {
    if (x_ref == 0.0) throw DomainError("state_clock_hook: reference state must be nonzero");
    FeatureHook hook;
    hook.name = "state_clock";
    hook.size = 2;
    hook.compute = [x_ref](const HistoryView& view, std::span<double> out) {
        out[0] = view.values.back() / x_ref - 1.0;
        out[1] = 2.0 * std::min(view.epochs.back(), view.horizon) / view.horizon - 1.0;
    };
    return hook;
}

void LsConfig::validate() const {
    skeleton.validate();
    if (!structure) throw DomainError("structure: must be set");
    if (structure->dim() != skeleton.dim || structure->epsilon() != skeleton.epsilon ||
        structure->horizon() != skeleton.horizon)
        throw DomainError("structure: epsilon, d and T must match the skeleton");
    if (paths < 2) throw DomainError("paths: must be at least 2");
    if (degree < 0) throw DomainError("degree: must be nonnegative");
    if (bound_policy == BoundPolicy::constant && !(bound > 0.0)) throw DomainError("bound: must be positive");
    if (!(payoff_bound >= 1.0)) throw DomainError("payoff_bound: must be at least 1");
    if (truncation && !(*truncation > 0.0)) throw DomainError("truncation: must be positive");
    if (compression && (compression->size == 0 || !compression->compute))
        throw DomainError("compression: hook must produce at least one feature");
}

FeatureMap::FeatureMap(int dim, double horizon, std::optional<FeatureHook> hook)
    : dim_(dim), horizon_(horizon), hook_(std::move(hook)) {}

std::size_t FeatureMap::inputs(std::size_t j) const {
    return hook_ ? hook_->size : j * static_cast<std::size_t>(dim_ + 1);
}

void FeatureMap::compute(std::size_t j, const PathState& state, std::span<double> out) const {
    if (state.steps() < j) throw ShapeError("FeatureMap: state shorter than the requested step");
    if (out.size() != inputs(j)) throw ShapeError("FeatureMap: output size mismatch");
    if (hook_) {
        const HistoryView view{History(state.increments).first(j), std::span<const double>(state.epochs).first(j + 1),
                               std::span<const double>(state.values).first(j + 1), horizon_};
        hook_->compute(view, out);
        return;
    }
    Architecture arch;
    arch.dim = dim_;
    arch.steps = j;
    arch.horizon = horizon_;
    const auto x = history_inputs(History(state.increments).first(j), arch);
    std::copy(x.begin(), x.end(), out.begin());
}

LsResult ls_solve(const LsConfig& config) {
    config.validate();
    const auto& structure = *config.structure;
    const std::size_t N = config.paths;
    const std::size_t e = num_periods(config.skeleton);
    const std::size_t d1 = static_cast<std::size_t>(config.skeleton.dim) + 1;
    const FeatureMap map(config.skeleton.dim, config.skeleton.horizon, config.compression);
    const std::size_t hook_size = config.compression ? config.compression->size : 0;
    const ExitTimeDistribution dist(config.skeleton.epsilon);

    LsResult result;
    result.periods = e;

    // Step 0: simulate paths and payoffs.
    auto t0 = std::chrono::steady_clock::now();
    std::vector<double> Z(N * (e + 1));
    std::vector<Increment> incs(map.compressed() ? 0 : N * e);
    std::vector<double> hooked(N * (e + 1) * hook_size);
    parallel_for(N, [&](std::size_t i) {
        Stream stream(config.skeleton.seed, StreamPurpose::skeleton, i);
        const SkeletonPath path = sample_path(config.skeleton, dist, stream);
        PathState state;
        try {
            state = structure.walk(path.increments);
        } catch (const Error& err) {
            throw PathError(i, err.what());
        }
        for (std::size_t j = 0; j <= e; ++j) Z[i * (e + 1) + j] = apply_truncation(state.payoffs[j], config.truncation);
        if (map.compressed()) {
            for (std::size_t j = 0; j <= e; ++j)
                map.compute(j, state, std::span<double>(hooked).subspan((i * (e + 1) + j) * hook_size, hook_size));
        } else {
            std::copy(path.increments.begin(), path.increments.end(), incs.begin() + static_cast<std::ptrdiff_t>(i * e));
        }
    });
    result.simulate_ms = elapsed_ms(t0);
    result.payoff0 = Z[0];

    // Steps 1-3: backward induction.
    t0 = std::chrono::steady_clock::now();
    std::vector<double> realized(N);
    result.stopping_index.assign(N, static_cast<std::uint32_t>(e));
    for (std::size_t i = 0; i < N; ++i) realized[i] = Z[i * (e + 1) + e];
    result.fits.resize(e);

    for (std::size_t jj = e; jj-- > 0;) {
        const std::size_t j = jj;
        const std::size_t m = map.inputs(j);
        const int degree = step_degree(config, map, j);
        const MonomialBasis basis(m, degree);
        const std::size_t p = basis.size();

        RowFunction row = [&](std::size_t i, std::span<double> out) {
            std::vector<double> x(m);
            if (map.compressed()) {
                const double* src = hooked.data() + (i * (e + 1) + j) * hook_size;
                std::copy(src, src + hook_size, x.begin());
            } else {
                for (std::size_t n = 0; n < j; ++n) {
                    const auto& inc = incs[i * e + n];
                    x[n * d1] = inc.dt / config.skeleton.horizon;
                    x[n * d1 + static_cast<std::size_t>(inc.mark.coordinate)] = inc.mark.sign;
                }
            }
            basis.evaluate(x, out);
        };

        double B = config.payoff_bound;
        if (config.bound_policy == BoundPolicy::constant) {
            B = config.bound;
        } else if (config.bound_policy == BoundPolicy::twice_target) {
            double top = 0.0;
            for (double v : realized) top = std::max(top, std::abs(v));
            B = std::max(2.0 * top, 1e-300);
        }

        StepFit step{j, degree, m, {}};
        try {
            step.fit = fit_least_squares(N, p, row, realized, B, config.least_squares);
        } catch (const Error& err) {
            throw StepError(j, err.what());
        }

        if (j > 0) {
            parallel_for(N, [&](std::size_t i) {
                std::vector<double> phi(p);
                row(i, phi);
                const double z = Z[i * (e + 1) + j];
                if (z >= evaluate(step.fit, phi)) {
                    realized[i] = z;
                    result.stopping_index[i] = static_cast<std::uint32_t>(j);
                }
            });
        } else {
            std::vector<double> phi(p);
            row(0, phi);
            result.continuation0 = evaluate(step.fit, phi);
            result.value = std::max(result.payoff0, result.continuation0);
            if (result.payoff0 >= result.continuation0) {
                std::fill(result.stopping_index.begin(), result.stopping_index.end(), 0U);
                std::fill(realized.begin(), realized.end(), result.payoff0);
            }
        }
        result.fits[j] = std::move(step);
    }
    result.regress_ms = elapsed_ms(t0);

    if (config.fresh_paths > 0) {
        t0 = std::chrono::steady_clock::now();
        const auto est = lower_bound_estimate(fitted_rule(config, result.fits), structure, config.skeleton,
                                              config.fresh_paths, config.skeleton.seed, config.truncation);
        result.lower_bound = est.mean;
        result.lower_bound_se = est.standard_error;
        result.fresh_paths = est.samples;
        result.lower_bound_ms = elapsed_ms(t0);
    }
    return result;
}

ContinuationRule fitted_rule(const LsConfig& config, const std::vector<StepFit>& fits) {
    auto map = std::make_shared<FeatureMap>(config.skeleton.dim, config.skeleton.horizon, config.compression);
    auto bases = std::make_shared<std::vector<MonomialBasis>>();
    for (const auto& f : fits) bases->emplace_back(f.inputs, f.degree);
    auto shared_fits = std::make_shared<std::vector<StepFit>>(fits);
    return [map, bases, shared_fits](std::size_t j, const PathState& state) {
        if (j >= shared_fits->size()) throw ShapeError("fitted rule: no fit for this step");
        const auto& basis = (*bases)[j];
        std::vector<double> x(basis.inputs());
        map->compute(j, state, x);
        return evaluate((*shared_fits)[j].fit, basis.evaluate(x));
    };
}

std::vector<std::vector<double>> cascade_payoffs(const std::vector<std::vector<char>>& stop,
                                                 const std::vector<std::vector<double>>& payoffs) {
    if (stop.size() != payoffs.size()) throw ShapeError("cascade_payoffs: path counts differ");
    std::vector<std::vector<double>> out(payoffs.size());
    for (std::size_t i = 0; i < payoffs.size(); ++i) {
        const auto& z = payoffs[i];
        if (z.empty() || stop[i].size() != z.size()) throw ShapeError("cascade_payoffs: malformed rule");
        auto& r = out[i];
        r.resize(z.size());
        r.back() = z.back();
        for (std::size_t j = z.size() - 1; j-- > 0;) r[j] = stop[i][j] ? z[j] : r[j + 1];
    }
    return out;
}

Estimate lower_bound_estimate(const ContinuationRule& rule, const RewardStructure& structure,
                              const SkeletonConfig& skeleton, std::size_t paths, std::uint64_t seed,
                              std::optional<double> truncation) {
    const std::size_t e = num_periods(skeleton);
    const ExitTimeDistribution dist(skeleton.epsilon);
    std::vector<double> realized(paths);
    parallel_for(paths, [&](std::size_t i) {
        Stream stream(seed, StreamPurpose::fresh, i);
        const SkeletonPath path = sample_path(skeleton, dist, stream);
        PathState state;
        try {
            structure.reset(state);
            for (std::size_t j = 0;; ++j) {
                if (j > 0) structure.push(state, path.increments[j - 1]);
                const double z = apply_truncation(state.payoffs.back(), truncation);
                // Past the horizon every later payoff equals the current one.
                if (j == e || state.frozen || z >= rule(j, state)) {
                    realized[i] = z;
                    break;
                }
            }
        } catch (const Error& err) {
            throw PathError(i, err.what());
        }
    });
    return summarize(realized);
}

}  // namespace dtstop
