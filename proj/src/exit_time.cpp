#include "dtstop/exit_time.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "dtstop/errors.hpp"

namespace dtstop {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kMaxTerms = 1000;

// Monotone lookup table of log S_1 on log-spaced scaled times; only used to
// bracket the quantile before Newton refinement.
struct QuantileTable {
    static constexpr int kNodes = 4096;
    static constexpr double kLow = 0.01;
    static constexpr double kHigh = 40.0;

    std::vector<double> x;
    std::vector<double> log_survival;

    QuantileTable() : x(kNodes), log_survival(kNodes) {
        const ExitTimeOptions defaults;
        const double step = std::log(kHigh / kLow) / (kNodes - 1);
        for (int i = 0; i < kNodes; ++i) {
            x[i] = kLow * std::exp(step * i);
            const auto v = x[i] < defaults.switch_point
                               ? ExitTimeDistribution::reflection_series(x[i], defaults.tolerance)
                               : ExitTimeDistribution::spectral_series(x[i], defaults.tolerance);
            log_survival[i] = v.cdf < 0.5 ? std::log1p(-v.cdf) : std::log(v.survival);
        }
    }
};

const QuantileTable& quantile_table() {
    static const QuantileTable table;
    return table;
}

double log_survival_of(const ExitTimeValues& v) {
    return v.cdf < 0.5 ? std::log1p(-v.cdf) : std::log(v.survival);
}

}  // namespace

ExitTimeDistribution::ExitTimeDistribution(double epsilon, ExitTimeOptions options)
    : epsilon_(epsilon), eps2_(epsilon * epsilon), options_(options) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        throw DomainError("exit time: epsilon must be positive and finite");
    if (!(options.tolerance > 0.0) || !(options.switch_point > 0.0))
        throw DomainError("exit time: tolerance and switch point must be positive");

    const double x = options_.switch_point;
    const auto a = spectral_series(x, options_.tolerance);
    const auto b = reflection_series(x, options_.tolerance);
    const double dens_gap = std::abs(a.density - b.density) / std::abs(b.density);
    const double surv_gap = std::abs(a.survival - b.survival) / std::abs(b.survival);
    if (dens_gap > 1e-10 || surv_gap > 1e-10)
        throw NumericalFailure("exit time: series branches disagree at the switch point",
                               std::max(dens_gap, surv_gap));
}

ExitTimeValues ExitTimeDistribution::spectral_series(double x, double tolerance) {
    const double rate = kPi * kPi / 8.0;
    double surv = 0.0;
    double dens = 0.0;
    for (int n = 0; n < kMaxTerms; ++n) {
        const double odd = 2.0 * n + 1.0;
        const double e = std::exp(-odd * odd * rate * x);
        const double sgn = (n % 2 == 0) ? 1.0 : -1.0;
        const double s_term = sgn * e / odd;
        const double d_term = sgn * e * odd;
        surv += s_term;
        dens += d_term;
        const double next_odd = odd + 2.0;
        const double next_e = std::exp(-next_odd * next_odd * rate * x);
        if (next_e * next_odd < tolerance * (std::abs(dens) + 1e-300) &&
            next_e / next_odd < tolerance * (std::abs(surv) + 1e-300))
            break;
    }
    surv *= 4.0 / kPi;
    dens *= kPi / 2.0;
    return {surv, 1.0 - surv, dens};
}

ExitTimeValues ExitTimeDistribution::reflection_series(double x, double tolerance) {
    const double root = std::sqrt(2.0 * x);
    const double pref = 2.0 / std::sqrt(2.0 * kPi * x * x * x);
    double cdf = 0.0;
    double dens = 0.0;
    for (int k = 0; k < kMaxTerms; ++k) {
        const double odd = 2.0 * k + 1.0;
        const double sgn = (k % 2 == 0) ? 1.0 : -1.0;
        cdf += sgn * std::erfc(odd / root);
        dens += sgn * odd * std::exp(-odd * odd / (2.0 * x));
        const double next_odd = odd + 2.0;
        const double next_c = std::erfc(next_odd / root);
        const double next_d = next_odd * std::exp(-next_odd * next_odd / (2.0 * x));
        if (next_c < tolerance * (std::abs(cdf) + 1e-300) &&
            next_d < tolerance * (std::abs(dens) + 1e-300))
            break;
    }
    cdf *= 2.0;
    dens *= pref;
    return {1.0 - cdf, cdf, dens};
}

ExitTimeValues ExitTimeDistribution::unit_values(double x) const {
    return x < options_.switch_point ? reflection_series(x, options_.tolerance)
                                     : spectral_series(x, options_.tolerance);
}

double ExitTimeDistribution::density(double t) const {
    if (!(t > 0.0)) throw DomainError("exit density: t must be positive");
    return unit_values(t / eps2_).density / eps2_;
}

double ExitTimeDistribution::survival(double t) const {
    if (!(t >= 0.0)) throw DomainError("exit survival: t must be nonnegative");
    if (t == 0.0) return 1.0;
    if (std::isinf(t)) return 0.0;
    return unit_values(t / eps2_).survival;
}

double ExitTimeDistribution::cdf(double t) const { return 1.0 - survival(t); }

ExitTimeValues ExitTimeDistribution::evaluate(double t) const {
    if (!(t > 0.0)) throw DomainError("exit time: t must be positive");
    auto v = unit_values(t / eps2_);
    v.density /= eps2_;
    return v;
}

double ExitTimeDistribution::unit_survival_quantile(double u) const {
    if (!(u > 0.0 && u < 1.0)) throw DomainError("exit quantile: u must lie in (0, 1)");
    const auto& table = quantile_table();
    const double target = std::log(u);
    const auto& ls = table.log_survival;

    // Bracket [lo, hi] with S(lo) >= u >= S(hi).
    double lo = 0.0;
    double hi = 0.0;
    double x = 0.0;
    if (target >= ls.front()) {
        lo = 0.0;
        hi = table.x.front();
        x = 0.5 * hi;
    } else if (target <= ls.back()) {
        lo = table.x.back();
        hi = 400.0;
        x = (std::log(4.0 / kPi) - target) * 8.0 / (kPi * kPi);
        x = std::clamp(x, lo, hi);
    } else {
        // ls is decreasing: first node whose log-survival drops below target.
        const auto it = std::lower_bound(ls.begin(), ls.end(), target,
                                         [](double a, double b) { return a > b; });
        const auto i = static_cast<std::size_t>(it - ls.begin());
        lo = table.x[i - 1];
        hi = table.x[i];
        const double w = (ls[i - 1] - target) / (ls[i - 1] - ls[i]);
        x = lo + w * (hi - lo);
    }

    for (int iter = 0; iter < 200; ++iter) {
        const auto v = unit_values(x);
        const double g = log_survival_of(v) - target;
        if (g > 0.0)
            lo = x;
        else if (g < 0.0)
            hi = x;
        else
            return x;
        const double slope = v.survival > 0.0 ? v.density / v.survival : 0.0;
        double next = slope > 0.0 ? x + g / slope : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= 2e-16 * x || hi - lo <= 4e-16 * hi) return next;
        x = next;
    }
    return x;
}

double ExitTimeDistribution::survival_quantile(double u) const {
    return eps2_ * unit_survival_quantile(u);
}

}  // namespace dtstop
