#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "dtstop/exit_time.hpp"
#include "dtstop/random.hpp"

namespace dtstop {

/// Level size, dimension and horizon of the discrete-type skeleton.
struct SkeletonConfig {
    double epsilon = 0.5;
    int dim = 1;
    double horizon = 1.0;
    std::uint64_t seed = 1;

    void validate() const;
};

/// d * ceil(T / eps^2). ResolutionTooFine if the count does not fit.
std::size_t num_periods(const SkeletonConfig& config);

/// Which coordinate renewed and in which direction. Coordinates are 1-based.
/// On sampled paths sign is exactly +1 or -1; the relaxed histories used by the
/// regularity probe allow real values.
struct Mark {
    int coordinate = 1;
    double sign = 1.0;

    friend bool operator==(const Mark&, const Mark&) = default;
};

struct Increment {
    double dt = 0.0;
    Mark mark;

    friend bool operator==(const Increment&, const Increment&) = default;
};

using History = std::span<const Increment>;

/// One realization of the skeleton noise (dt_1, eta_1, ..., dt_n, eta_n).
struct SkeletonPath {
    std::vector<Increment> increments;
    /// Number of epoch ties broken by lowest coordinate while merging.
    std::size_t ties = 0;

    std::size_t size() const noexcept { return increments.size(); }
    /// Epochs t_0 = 0, t_1, ..., t_n as running sums of the increments.
    std::vector<double> epochs() const;
};

/// Coordinate (1-based) and sign of a mark vector with exactly one nonzero entry +-1.
std::pair<int, int> aleph(std::span<const int> mark_vector);
/// Inverse of aleph for a given dimension.
std::vector<int> mark_vector(const Mark& mark, int dim);

/// Merges d independent renewal streams of exit times (each with a fair sign)
/// in epoch order until num_periods(config) increments exist.
SkeletonPath sample_path(const SkeletonConfig& config, const ExitTimeDistribution& dist, Stream& stream);
SkeletonPath sample_path(const SkeletonConfig& config, Stream& stream);

/// Batch of paths; path i uses substream (config.seed, skeleton, first_index + i).
std::vector<SkeletonPath> sample_paths(const SkeletonConfig& config, std::size_t count,
                                       std::uint64_t first_index = 0);

/// A^k(t): per coordinate, eps times the signed number of renewals with epoch <= t.
std::vector<double> step_process(const SkeletonPath& path, const SkeletonConfig& config, double t);

}  // namespace dtstop
