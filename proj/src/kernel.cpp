#include "dtstop/kernel.hpp"

#include <cmath>
#include <string>

#include "dtstop/errors.hpp"

namespace dtstop {

HistoryStats history_stats(History history, int dim) {
    if (dim < 1) throw DomainError("history_stats: dim must be at least 1");
    const auto d = static_cast<std::size_t>(dim);
    HistoryStats s;
    s.dim = dim;
    s.last_epoch.assign(d, 0.0);
    s.age.assign(d, 0.0);
    s.jumps.assign(d, 0);
    s.last_index.assign(d, 0);

    double clock = 0.0;
    std::size_t n = 0;
    for (const auto& inc : history) {
        ++n;
        if (!(inc.dt > 0.0) || !std::isfinite(inc.dt))
            throw InvalidHistory("history_stats: dt must be positive at step " + std::to_string(n));
        if (inc.mark.coordinate < 1 || inc.mark.coordinate > dim ||
            (inc.mark.sign != 1.0 && inc.mark.sign != -1.0))
            throw InvalidHistory("history_stats: invalid mark at step " + std::to_string(n));
        clock += inc.dt;
        const auto c = static_cast<std::size_t>(inc.mark.coordinate - 1);
        s.last_epoch[c] = clock;
        ++s.jumps[c];
        s.last_index[c] = n;
    }
    s.n = n;
    s.clock = clock;
    for (std::size_t c = 0; c < d; ++c) s.age[c] = clock - s.last_epoch[c];
    return s;
}

TransitionKernel::TransitionKernel(double epsilon, int dim, KernelOptions options)
    : dist_(epsilon), dim_(dim), options_(options) {
    if (dim < 1) throw DomainError("kernel: dim must be at least 1");
}

void TransitionKernel::check(const HistoryStats& stats, int j) const {
    if (stats.dim != dim_) throw ShapeError("kernel: history dimension does not match the kernel");
    if (j < 1 || j > dim_) throw InvalidMark("kernel: coordinate out of range");
}

double TransitionKernel::min_density_of_others(const HistoryStats& stats, int j, double t) const {
    // Density at t of min over l != j of the unnormalized residuals, i.e.
    // -d/dt prod_{l != j} S(t + D_l).
    const auto d = static_cast<std::size_t>(dim_);
    const auto skip = static_cast<std::size_t>(j - 1);
    double total = 0.0;
    for (std::size_t l = 0; l < d; ++l) {
        if (l == skip) continue;
        double term = dist_.density(t + stats.age[l]);
        for (std::size_t m = 0; m < d; ++m)
            if (m != skip && m != l) term *= dist_.survival(t + stats.age[m]);
        total += term;
    }
    return total;
}

double TransitionKernel::coordinate_win_prob(const HistoryStats& stats, int j) const {
    check(stats, j);
    if (dim_ == 1) return 1.0;

    double denominator = 1.0;
    for (double a : stats.age) denominator *= dist_.survival(a);
    if (!(denominator > 0.0)) throw NumericalFailure("coordinate_win_prob: ages beyond survival range", 0.0);

    const double scale = dist_.mean();
    const double dj = stats.age[static_cast<std::size_t>(j - 1)];
    QuadratureOptions inner = options_.quadrature;
    inner.abs_tolerance = 1e-12 * denominator;
    QuadratureOptions outer = options_.quadrature;
    outer.abs_tolerance = 1e-10 * denominator;

    auto inner_integral = [&](double v) {
        auto integrand = [&](double w) {
            return dist_.density(w + dj) * min_density_of_others(stats, j, v + w);
        };
        return integrate_time(integrand, 0.0, INFINITY, scale, inner).value;
    };
    const double numerator = integrate_time(inner_integral, 0.0, INFINITY, scale, outer).value;
    return numerator / denominator;
}

double TransitionKernel::time_density_given_mark(const HistoryStats& stats, int j, double t) const {
    check(stats, j);
    if (!(t > 0.0)) throw DomainError("time_density_given_mark: t must be positive");
    const double dj = stats.age[static_cast<std::size_t>(j - 1)];
    return dist_.density(t + dj) / dist_.survival(dj);
}

double TransitionKernel::transition_density(const HistoryStats& stats, int j, int sign, double t) const {
    check(stats, j);
    if (sign != 1 && sign != -1) throw InvalidMark("transition_density: sign must be +-1");
    if (!(t > 0.0)) throw DomainError("transition_density: t must be positive");
    double value = 0.5 * time_density_given_mark(stats, j, t);
    const auto skip = static_cast<std::size_t>(j - 1);
    for (std::size_t l = 0; l < stats.age.size(); ++l)
        if (l != skip) value *= dist_.survival(t + stats.age[l]) / dist_.survival(stats.age[l]);
    return value;
}

double TransitionKernel::transition_prob(const HistoryStats& stats, int j, int sign, double a, double b) const {
    check(stats, j);
    if (!(a >= 0.0) || !(b > a)) throw DomainError("transition_prob: window must satisfy 0 <= a < b");
    auto density = [&](double t) { return transition_density(stats, j, sign, t); };
    return integrate_time(density, a, b, dist_.mean(), options_.quadrature).value;
}

double TransitionKernel::condexp_step(const StepFunction& g, History history) const {
    const HistoryStats stats = history_stats(history, dim_);
    double total = 0.0;
    for (int j = 1; j <= dim_; ++j) {
        for (int sign : {-1, 1}) {
            const Mark mark{j, static_cast<double>(sign)};
            auto integrand = [&](double t) { return g(history, t, mark) * transition_density(stats, j, sign, t); };
            total += integrate_time(integrand, 0.0, INFINITY, dist_.mean(), options_.quadrature).value;
        }
    }
    return total;
}

}  // namespace dtstop
