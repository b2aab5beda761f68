#include "dtstop/probe.hpp"

#include <algorithm>
#include <cmath>

#include "dtstop/errors.hpp"
#include "dtstop/parallel.hpp"

namespace dtstop {

std::vector<ProbeScale> lipschitz_probe(const std::function<double(History)>& continuation,
                                        const SkeletonConfig& skeleton, std::size_t step,
                                        const ProbeOptions& options) {
    skeleton.validate();
    if (step < 1) throw DomainError("lipschitz_probe: step must be at least 1");
    if (options.pairs == 0 || options.scales.empty()) throw DomainError("lipschitz_probe: nothing to probe");
    const double limit = skeleton.horizon - options.margin;
    if (!(limit > 0.0)) throw DomainError("lipschitz_probe: margin leaves no room before the horizon");
    const ExitTimeDistribution dist(skeleton.epsilon);
    const std::size_t dims = 2 * step;

    std::vector<std::vector<Increment>> bases(options.pairs);
    std::vector<std::vector<double>> directions(options.pairs);
    for (std::size_t p = 0; p < options.pairs; ++p) {
        Stream stream(options.seed, StreamPurpose::probe, p);
        for (int attempt = 0;; ++attempt) {
            if (attempt > 10000) throw NumericalFailure("lipschitz_probe: no base history before the horizon", 0.0);
            std::vector<Increment> h(step);
            double clock = 0.0;
            for (auto& inc : h) {
                inc.dt = dist.sample(stream);
                inc.mark = Mark{1, static_cast<double>(stream.sign())};
                clock += inc.dt;
            }
            if (clock <= limit) {
                bases[p] = std::move(h);
                break;
            }
        }
        std::vector<double> w(dims);
        double norm = 0.0;
        for (double& x : w) {
            x = stream.normal();
            norm += x * x;
        }
        norm = std::sqrt(norm);
        for (double& x : w) x /= norm;
        directions[p] = std::move(w);
    }

    std::vector<double> base_values(options.pairs);
    parallel_for(options.pairs, [&](std::size_t p) { base_values[p] = continuation(bases[p]); });

    std::vector<ProbeScale> out;
    for (double h : options.scales) {
        if (!(h > 0.0)) throw DomainError("lipschitz_probe: scales must be positive");
        std::vector<double> ratios(options.pairs);
        parallel_for(options.pairs, [&](std::size_t p) {
            std::vector<Increment> moved = bases[p];
            for (std::size_t n = 0; n < step; ++n) {
                double w_dt = directions[p][2 * n];
                if (moved[n].dt + h * w_dt <= 0.0) w_dt = -w_dt;
                moved[n].dt += h * w_dt;
                moved[n].mark.sign += h * directions[p][2 * n + 1];
            }
            ratios[p] = std::abs(continuation(moved) - base_values[p]) / h;
        });
        std::vector<double> sorted = ratios;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t n = sorted.size();
        const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
        out.push_back({h, sorted.back(), median, n});
    }
    return out;
}

}  // namespace dtstop
