#include "dtstop/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/legendre.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <queue>

#include "dtstop/errors.hpp"

namespace dtstop {

namespace {

struct Panel {
    double a, b, value, error;
    std::size_t order;  // creation order, breaks ties deterministically
};

struct ByError {
    bool operator()(const Panel& x, const Panel& y) const {
        if (x.error != y.error) return x.error < y.error;
        return x.order > y.order;
    }
};

Panel gk15(const std::function<double(double)>& f, double a, double b, std::size_t order) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
    using G = boost::math::quadrature::gauss<double, 7>;
    const auto& x = GK::abscissa();
    const auto& wk = GK::weights();
    const auto& wg = G::weights();

    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double fc = f(c);
    double kronrod = wk[0] * fc;
    double gauss = wg[0] * fc;
    for (std::size_t i = 1; i < x.size(); ++i) {
        const double s = f(c - h * x[i]) + f(c + h * x[i]);
        kronrod += wk[i] * s;
        if (i % 2 == 0) gauss += wg[i / 2] * s;
    }
    kronrod *= h;
    gauss *= h;
    if (!std::isfinite(kronrod)) throw NumericalFailure("quadrature: non-finite integrand", kronrod);
    return {a, b, kronrod, std::abs(kronrod - gauss), order};
}

}  // namespace

QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           const QuadratureOptions& options) {
    if (!(b > a)) return {};
    std::priority_queue<Panel, std::vector<Panel>, ByError> queue;
    std::size_t created = 0;
    queue.push(gk15(f, a, b, created++));
    double total = queue.top().value;
    double error = queue.top().error;
    std::size_t panels = 1;

    while (error > options.abs_tolerance) {
        if (panels >= options.max_panels)
            throw NumericalFailure("quadrature: panel budget exhausted", error);
        const Panel worst = queue.top();
        queue.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) throw NumericalFailure("quadrature: panel collapsed", error);
        const Panel left = gk15(f, worst.a, mid, created++);
        const Panel right = gk15(f, mid, worst.b, created++);
        total += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        queue.push(left);
        queue.push(right);
        ++panels;
    }

    // Re-sum from scratch to avoid drift from incremental updates.
    std::vector<Panel> all;
    all.reserve(queue.size());
    while (!queue.empty()) {
        all.push_back(queue.top());
        queue.pop();
    }
    std::sort(all.begin(), all.end(), [](const Panel& x, const Panel& y) { return x.a < y.a; });
    double value = 0.0;
    double err = 0.0;
    for (const auto& p : all) {
        value += p.value;
        err += p.error;
    }
    return {value, err, panels};
}

QuadratureResult integrate_time(const std::function<double(double)>& f, double a, double b, double scale,
                                const QuadratureOptions& options) {
    if (!(a >= 0.0) || !(b > a) || !(scale > 0.0)) throw DomainError("integrate_time: need 0 <= a < b");
    const double ua = a / (a + scale);
    const double ub = std::isinf(b) ? 1.0 : b / (b + scale);
    auto g = [&](double u) {
        if (u <= 0.0 || u >= 1.0) return 0.0;
        const double one_minus = 1.0 - u;
        const double t = scale * u / one_minus;
        return f(t) * scale / (one_minus * one_minus);
    };
    return integrate(g, ua, ub, options);
}

const GaussRule& gauss_legendre(int n) {
    static std::mutex guard;
    static std::map<int, GaussRule> cache;
    if (n < 1) throw DomainError("gauss_legendre: need at least one node");
    std::lock_guard lock(guard);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    // legendre_p_zeros returns the nonnegative roots in increasing order.
    const auto zeros = boost::math::legendre_p_zeros<double>(n);
    std::vector<double> nodes;
    for (auto it2 = zeros.rbegin(); it2 != zeros.rend(); ++it2)
        if (*it2 > 0.0) nodes.push_back(-*it2);
    for (double z : zeros) nodes.push_back(z);
    GaussRule rule;
    rule.nodes = nodes;
    for (double x : nodes) {
        const double dp = boost::math::legendre_p_prime(n, x);
        rule.weights.push_back(2.0 / ((1.0 - x * x) * dp * dp));
    }
    return cache.emplace(n, std::move(rule)).first->second;
}

}  // namespace dtstop
