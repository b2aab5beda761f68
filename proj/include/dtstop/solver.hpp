#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dtstop/regression.hpp"
#include "dtstop/skeleton.hpp"
#include "dtstop/structures.hpp"

namespace dtstop {

/// What a feature-compression hook sees: the history up to step j together
/// with the structure's epochs and state values on it.
struct HistoryView {
    History increments;
    std::span<const double> epochs;
    std::span<const double> values;
    double horizon = 1.0;
};

/// Replaces the full-history regressors by a short summary of the history.
/// This is a projection heuristic: the continuation value is in general a
/// function of the whole history.
struct FeatureHook {
    std::string name;
    std::size_t size = 0;
    std::function<void(const HistoryView&, std::span<double>)> compute;
};

/// (x / x_ref - 1, 2 min(t, T) / T - 1): state and clock.
FeatureHook state_clock_hook(double x_ref);

enum class DegreePolicy { schedule, fixed };
enum class BoundPolicy { constant, payoff, twice_target };

struct LsConfig {
    SkeletonConfig skeleton;
    std::shared_ptr<const RewardStructure> structure;
    std::size_t paths = 1000;
    std::size_t fresh_paths = 0;
    DegreePolicy degree_policy = DegreePolicy::schedule;
    int degree = 2;
    BoundPolicy bound_policy = BoundPolicy::payoff;
    double bound = 1.0;
    /// L_k: declared sup bound of the payoffs (at least 1).
    double payoff_bound = 1.0;
    /// Payoffs are replaced by truncate(Z, beta) when set.
    std::optional<double> truncation;
    std::optional<FeatureHook> compression;
    LeastSquaresOptions least_squares;

    void validate() const;
};

struct StepFit {
    std::size_t step = 0;
    int degree = 0;
    std::size_t inputs = 0;
    FitResult fit;
};

struct LsResult {
    double value = 0.0;           // V_hat_0
    double continuation0 = 0.0;   // U_hat_0(0)
    double payoff0 = 0.0;         // Z_0(0)
    std::size_t periods = 0;
    std::vector<StepFit> fits;    // index j = 0 .. periods-1
    std::vector<std::uint32_t> stopping_index;
    double lower_bound = 0.0;
    double lower_bound_se = 0.0;
    std::size_t fresh_paths = 0;
    double simulate_ms = 0.0;
    double regress_ms = 0.0;
    double lower_bound_ms = 0.0;
};

/// Computes the regression inputs at step j from a walked path state.
class FeatureMap {
public:
    FeatureMap(int dim, double horizon, std::optional<FeatureHook> hook);

    bool compressed() const noexcept { return hook_.has_value(); }
    std::size_t inputs(std::size_t j) const;
    /// Inputs of the first j steps of state.
    void compute(std::size_t j, const PathState& state, std::span<double> out) const;

private:
    int dim_;
    double horizon_;
    std::optional<FeatureHook> hook_;
};

/// Least-squares Monte Carlo over the skeleton: simulate N paths, regress the
/// cascaded payoffs backward from the last period, stop where Z_j >= U_hat_j.
LsResult ls_solve(const LsConfig& config);

/// Realized payoffs Z_{tau_j} for every path and every j, given stop decisions
/// (stop[i][j] != 0 means the rule stops at j). The last period always stops.
std::vector<std::vector<double>> cascade_payoffs(const std::vector<std::vector<char>>& stop,
                                                 const std::vector<std::vector<double>>& payoffs);

/// Continuation estimate at step j for a walked state with exactly j steps.
using ContinuationRule = std::function<double(std::size_t j, const PathState& state)>;

/// Rule built from the fits of an LS run.
ContinuationRule fitted_rule(const LsConfig& config, const std::vector<StepFit>& fits);

struct Estimate {
    double mean = 0.0;
    double standard_error = 0.0;
    std::size_t samples = 0;
};

/// Mean realized payoff of the frozen rule on fresh paths (substreams
/// (seed, fresh, i)); an unbiased estimate of a value below V_0.
Estimate lower_bound_estimate(const ContinuationRule& rule, const RewardStructure& structure,
                              const SkeletonConfig& skeleton, std::size_t paths, std::uint64_t seed,
                              std::optional<double> truncation = std::nullopt);

}  // namespace dtstop
