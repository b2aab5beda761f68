#include "dtstop/skeleton.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "dtstop/errors.hpp"
#include "dtstop/parallel.hpp"

namespace dtstop {

void SkeletonConfig::validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw DomainError("skeleton: epsilon must be positive");
    if (dim < 1) throw DomainError("skeleton: dim must be at least 1");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("skeleton: horizon must be positive");
}

std::size_t num_periods(const SkeletonConfig& config) {
    config.validate();
    const double per_coordinate = std::ceil(config.horizon / (config.epsilon * config.epsilon));
    // Keep counts exactly representable as doubles as well as size_t.
    constexpr double kLimit = 9007199254740992.0;  // 2^53
    if (!std::isfinite(per_coordinate) || per_coordinate * config.dim > kLimit)
        throw ResolutionTooFine("num_periods: T/eps^2 exceeds the representable range");
    return static_cast<std::size_t>(per_coordinate) * static_cast<std::size_t>(config.dim);
}

std::vector<double> SkeletonPath::epochs() const {
    std::vector<double> out(increments.size() + 1, 0.0);
    for (std::size_t n = 0; n < increments.size(); ++n) out[n + 1] = out[n] + increments[n].dt;
    return out;
}

std::pair<int, int> aleph(std::span<const int> mark_vector) {
    int coordinate = 0;
    int sign = 0;
    for (std::size_t j = 0; j < mark_vector.size(); ++j) {
        const int v = mark_vector[j];
        if (v == 0) continue;
        if ((v != 1 && v != -1) || coordinate != 0)
            throw InvalidMark("aleph: mark must have exactly one nonzero entry equal to +-1");
        coordinate = static_cast<int>(j) + 1;
        sign = v;
    }
    if (coordinate == 0) throw InvalidMark("aleph: mark has no nonzero entry");
    return {coordinate, sign};
}

std::vector<int> mark_vector(const Mark& mark, int dim) {
    if (mark.coordinate < 1 || mark.coordinate > dim) throw InvalidMark("mark coordinate out of range");
    if (mark.sign != 1.0 && mark.sign != -1.0) throw InvalidMark("mark sign must be +-1");
    std::vector<int> out(static_cast<std::size_t>(dim), 0);
    out[static_cast<std::size_t>(mark.coordinate - 1)] = static_cast<int>(mark.sign);
    return out;
}

SkeletonPath sample_path(const SkeletonConfig& config, const ExitTimeDistribution& dist, Stream& stream) {
    const std::size_t periods = num_periods(config);
    const auto d = static_cast<std::size_t>(config.dim);

    SkeletonPath path;
    path.increments.reserve(periods);
    std::vector<double> next(d);
    for (auto& t : next) t = dist.sample(stream);

    double clock = 0.0;
    while (path.increments.size() < periods) {
        std::size_t winner = 0;
        for (std::size_t j = 1; j < d; ++j) {
            if (next[j] < next[winner])
                winner = j;
            else if (next[j] == next[winner])
                ++path.ties;
        }
        const double dt = next[winner] - clock;
        clock = next[winner];
        const int sign = stream.sign();
        path.increments.push_back({dt, Mark{static_cast<int>(winner) + 1, static_cast<double>(sign)}});
        next[winner] = clock + dist.sample(stream);
    }
    return path;
}

SkeletonPath sample_path(const SkeletonConfig& config, Stream& stream) {
    const ExitTimeDistribution dist(config.epsilon);
    return sample_path(config, dist, stream);
}

std::vector<SkeletonPath> sample_paths(const SkeletonConfig& config, std::size_t count,
                                       std::uint64_t first_index) {
    const ExitTimeDistribution dist(config.epsilon);
    std::vector<SkeletonPath> out(count);
    parallel_for(count, [&](std::size_t i) {
        Stream stream(config.seed, StreamPurpose::skeleton, first_index + i);
        out[i] = sample_path(config, dist, stream);
    });
    return out;
}

std::vector<double> step_process(const SkeletonPath& path, const SkeletonConfig& config, double t) {
    if (!(t >= 0.0 && t <= config.horizon)) throw DomainError("step_process: t outside [0, T]");
    std::vector<double> a(static_cast<std::size_t>(config.dim), 0.0);
    double epoch = 0.0;
    for (const auto& inc : path.increments) {
        epoch += inc.dt;
        if (epoch > t) break;
        a[static_cast<std::size_t>(inc.mark.coordinate - 1)] += config.epsilon * inc.mark.sign;
    }
    return a;
}

}  // namespace dtstop
