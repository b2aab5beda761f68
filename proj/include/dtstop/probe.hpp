#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "dtstop/skeleton.hpp"

namespace dtstop {

struct ProbeScale {
    double h = 0.0;
    double max_ratio = 0.0;
    double median_ratio = 0.0;
    std::size_t pairs = 0;
};

struct ProbeOptions {
    std::vector<double> scales{1e-2, 1e-3, 1e-4};
    std::size_t pairs = 200;
    /// Base histories keep t_j <= T - margin so perturbed clocks stay before the horizon.
    double margin = 0.05;
    std::uint64_t seed = 1;
};

/// Finite-difference Lipschitz probe of a continuation value U_j on relaxed
/// histories (dt > 0, marks real). For each pair, a sampled base history b and
/// a unit direction w give b' = b + h w (dt components reflected to stay
/// positive); the ratio |U(b) - U(b')| / |b - b'| is collected per scale. The
/// same bases and directions are reused at every scale.
std::vector<ProbeScale> lipschitz_probe(const std::function<double(History)>& continuation,
                                        const SkeletonConfig& skeleton, std::size_t step,
                                        const ProbeOptions& options = {});

}  // namespace dtstop
