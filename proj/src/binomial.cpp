#include "dtstop/binomial.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dtstop/errors.hpp"

namespace dtstop {

namespace {

double crr_put(const BinomialPut& put, bool american) {
    if (put.steps < 1 || !(put.spot > 0.0) || !(put.strike > 0.0) || !(put.volatility > 0.0) ||
        !(put.maturity > 0.0))
        throw DomainError("binomial: invalid contract or tree size");
    const int n = put.steps;
    const double dt = put.maturity / n;
    const double u = std::exp(put.volatility * std::sqrt(dt));
    const double d = 1.0 / u;
    const double growth = std::exp(put.rate * dt);
    const double p = (growth - d) / (u - d);
    if (!(p > 0.0 && p < 1.0)) throw DomainError("binomial: risk-neutral probability outside (0, 1)");
    const double disc = 1.0 / growth;

    std::vector<double> v(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) {
        const double s = put.spot * std::pow(u, n - 2 * i);
        v[static_cast<std::size_t>(i)] = std::max(put.strike - s, 0.0);
    }
    for (int step = n - 1; step >= 0; --step) {
        double s = put.spot * std::pow(u, step);
        const double down2 = d * d;
        for (int i = 0; i <= step; ++i) {
            const auto k = static_cast<std::size_t>(i);
            double cont = disc * (p * v[k] + (1.0 - p) * v[k + 1]);
            if (american) cont = std::max(cont, put.strike - s);
            v[k] = cont;
            s *= down2;
        }
    }
    return v[0];
}

}  // namespace

double american_put_crr(const BinomialPut& put) { return crr_put(put, true); }
double european_put_crr(const BinomialPut& put) { return crr_put(put, false); }

}  // namespace dtstop
