#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dtstop/random.hpp"
#include "dtstop/skeleton.hpp"

namespace dtstop {

/// The path omega stopped at its last node: a right-continuous step function
/// taking values[i] on [epochs[i], epochs[i+1]). Running extrema are carried
/// along so sup-type functionals cost O(1).
struct StoppedPath {
    std::span<const double> epochs;
    std::span<const double> values;
    double running_max = 0.0;
    double running_min = 0.0;

    double current() const { return values.back(); }
    double sup_abs() const { return std::max(running_max, -running_min); }
    /// omega(t) for t >= 0; frozen at the last value beyond the last epoch.
    double at(double t) const;
};

/// Builds the stopped view of the first m+1 nodes, computing the extrema.
StoppedPath stopped_view(std::span<const double> epochs, std::span<const double> values);

using PathFunctional = std::function<double(double t, const StoppedPath& path)>;

struct SdeCoefficients {
    std::string name = "custom";
    PathFunctional drift;
    PathFunctional diffusion;
    double x0 = 0.0;
    double lipschitz = 0.0;
};

struct RewardFunctional {
    std::string name = "custom";
    PathFunctional evaluate;
    std::optional<double> sup_bound;
    std::optional<double> lipschitz;
};

using Parameters = std::map<std::string, double>;

/// Built-ins: zero, random_walk(sigma), geometric(r, nu), pathdep_vol. All take x0.
SdeCoefficients make_coefficients(const std::string& name, const Parameters& params = {});
/// Built-ins: constant(c), put(K, r), bounded_put(K, r), running_max, identity.
/// A positive r multiplies the payoff by exp(-r t).
RewardFunctional make_payoff(const std::string& name, const Parameters& params = {});

/// h_0..h_m on epochs t_0..t_m.
struct StatePath {
    std::vector<double> epochs;
    std::vector<double> values;
};

/// Z_0..Z_n with n_T the last index whose epoch is <= T.
struct PayoffSequence {
    std::vector<double> values;
    std::size_t n_T = 0;
};

/// h_m = h_{m-1} + alpha(t_{m-1}, gamma_{m-1}) dt + sigma(t_{m-1}, gamma_{m-1}) eps sign.
double euler_step(const SdeCoefficients& coeffs, const StatePath& prior, const Increment& inc, double epsilon);
StatePath euler_path(const SdeCoefficients& coeffs, History skeleton, double epsilon);
PayoffSequence reward_path(const RewardFunctional& F, const StatePath& state, double horizon);

/// Scalars needed to undo pushes on a PathState.
struct Checkpoint {
    std::size_t steps = 0;
    double running_max = 0.0;
    double running_min = 0.0;
    std::size_t n_T = 0;
    bool frozen = false;
};

/// Incremental state while a structure walks along one history.
struct PathState {
    std::vector<Increment> increments;
    std::vector<double> epochs;
    std::vector<double> values;
    std::vector<double> payoffs;
    double running_max = 0.0;
    double running_min = 0.0;
    std::size_t n_T = 0;
    bool frozen = false;

    std::size_t steps() const { return increments.size(); }
    Checkpoint checkpoint() const { return {steps(), running_max, running_min, n_T, frozen}; }
    /// Drops everything pushed after the checkpoint was taken.
    void rewind(const Checkpoint& c);
};

/// A reward process paired with its imbedded discrete structure: produces the
/// payoffs Z_0, Z_1, ... along a skeleton history, frozen once the clock passes T.
class RewardStructure {
public:
    RewardStructure(double epsilon, int dim, double horizon);
    virtual ~RewardStructure() = default;

    double epsilon() const noexcept { return epsilon_; }
    int dim() const noexcept { return dim_; }
    double horizon() const noexcept { return horizon_; }

    virtual std::string name() const = 0;
    virtual std::optional<double> sup_bound() const { return std::nullopt; }
    /// Whether payoffs freeze once the clock passes the horizon (true for every
    /// structure built from a reward process on [0, T]).
    virtual bool freezes() const { return true; }

    void reset(PathState& state) const;
    /// Appends one increment; CoefficientError on a non-finite payoff or one beyond the declared bound.
    void push(PathState& state, const Increment& inc) const;
    /// Z_0..Z_n along the history.
    std::vector<double> payoffs(History history) const;
    PathState walk(History history) const;

protected:
    virtual double initial_value() const = 0;
    virtual double next_value(const PathState& state, const Increment& inc) const = 0;
    /// Payoff at the last node of state (history, epochs and values already appended).
    virtual double payoff(const PathState& state) const = 0;

private:
    void check_payoff(double z) const;

    double epsilon_;
    int dim_;
    double horizon_;
};

/// Euler scheme on the random partition of a one-dimensional skeleton.
class EulerStructure final : public RewardStructure {
public:
    EulerStructure(SdeCoefficients coeffs, RewardFunctional reward, double epsilon, double horizon);

    std::string name() const override { return coeffs_.name + "/" + reward_.name; }
    std::optional<double> sup_bound() const override { return reward_.sup_bound; }
    const SdeCoefficients& coefficients() const { return coeffs_; }
    const RewardFunctional& reward() const { return reward_; }

protected:
    double initial_value() const override { return coeffs_.x0; }
    double next_value(const PathState& state, const Increment& inc) const override;
    double payoff(const PathState& state) const override;

private:
    SdeCoefficients coeffs_;
    RewardFunctional reward_;
};

/// Payoff given directly as a functional of the skeleton history (any d).
class HistoryStructure final : public RewardStructure {
public:
    using Functional = std::function<double(History history, double clock)>;

    /// freeze = false keeps evaluating the functional past the horizon, for
    /// payoffs defined on the index sequence rather than on [0, T].
    HistoryStructure(std::string name, Functional payoff, double epsilon, int dim, double horizon,
                     std::optional<double> sup_bound = std::nullopt, bool freeze = true);

    std::string name() const override { return name_; }
    std::optional<double> sup_bound() const override { return bound_; }
    bool freezes() const override { return freeze_; }

protected:
    double initial_value() const override { return 0.0; }
    double next_value(const PathState&, const Increment&) const override { return 0.0; }
    double payoff(const PathState& state) const override;

private:
    std::string name_;
    Functional payoff_;
    std::optional<double> bound_;
    bool freeze_;
};

/// Fine +-delta random walk with time step delta^2, the common source of
/// randomness for coupled skeletons at every coarser level.
struct FineWalk {
    double delta = 0.0;
    std::vector<std::int8_t> steps;
};
FineWalk fine_walk(double delta, double horizon, Stream& stream);
/// Successive exits of the walk from +-epsilon bands around the last crossing
/// level, as skeleton increments. epsilon must be an integer multiple of delta.
std::vector<Increment> coupled_skeleton(const FineWalk& walk, double epsilon);
/// Euler scheme on the fine grid driven by the walk itself.
StatePath fine_euler(const SdeCoefficients& coeffs, const FineWalk& walk);

struct ConvergenceLevel {
    double epsilon = 0.0;
    double mean_distance = 0.0;
    double standard_error = 0.0;
    std::vector<double> distances;
};

/// Estimates E sup_{t <= T} |Z^k(t ^ T_e) - Z_ref(t)| per level against a fine
/// coupled Euler reference at step (min eps / 10)^2.
std::vector<ConvergenceLevel> structure_convergence_check(const RewardFunctional& F, const SdeCoefficients& coeffs,
                                                          const std::vector<double>& epsilons, std::size_t n_paths,
                                                          double horizon, std::uint64_t seed);

}  // namespace dtstop
