#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "dtstop/exit_time.hpp"
#include "dtstop/quadrature.hpp"
#include "dtstop/skeleton.hpp"

namespace dtstop {

/// Bookkeeping of a history b_n: clock, last renewal epoch, age, jump count and
/// last jump index of every coordinate. Coordinates are stored 0-based.
struct HistoryStats {
    std::size_t n = 0;
    int dim = 1;
    double clock = 0.0;
    std::vector<double> last_epoch;
    std::vector<double> age;
    std::vector<std::size_t> jumps;
    std::vector<std::size_t> last_index;  // 0 when the coordinate never jumped
};

/// InvalidHistory on a non-positive dt or a mark that is not a valid element of I_k.
HistoryStats history_stats(History history, int dim);

struct KernelOptions {
    QuadratureOptions quadrature;
};

/// Transition law of the next skeleton increment given the history.
///
/// Given ages D_l, coordinate l renews next after a residual time with density
/// f(t + D_l) / S(D_l), independently across coordinates; the next increment is
/// the smallest residual and its sign is a fair coin. Hence
///
///   P(dT in dt, mark = (j, s) | b) = 1/2 * f(t + D_j)/S(D_j) * prod_{l != j} S(t + D_l)/S(D_l) dt.
class TransitionKernel {
public:
    TransitionKernel(double epsilon, int dim, KernelOptions options = {});

    int dim() const noexcept { return dim_; }
    const ExitTimeDistribution& exit_time() const noexcept { return dist_; }

    /// P(next mark has coordinate j | b), 1-based j. For d >= 2 evaluated as the
    /// iterated double integral
    ///   int_0^inf dv int_0^inf f(w + D_j) g(v + w) dw / prod_l S(D_l),
    /// where g is the density of the earliest renewal among the other coordinates.
    double coordinate_win_prob(const HistoryStats& stats, int j) const;

    /// Residual density f(t + D_j) / S(D_j).
    double time_density_given_mark(const HistoryStats& stats, int j, double t) const;

    /// Joint density of (dT, mark = (j, sign)) at dT = t.
    double transition_density(const HistoryStats& stats, int j, int sign, double t) const;

    /// Integral of transition_density over the window (a, b), 0 <= a < b <= inf.
    double transition_prob(const HistoryStats& stats, int j, int sign, double a, double b) const;

    using StepFunction = std::function<double(History, double dt, const Mark&)>;
    /// E[g(b, dT, mark) | b] by adaptive quadrature over every (coordinate, sign).
    double condexp_step(const StepFunction& g, History history) const;

private:
    void check(const HistoryStats& stats, int j) const;
    double min_density_of_others(const HistoryStats& stats, int j, double t) const;

    ExitTimeDistribution dist_;
    int dim_;
    KernelOptions options_;
};

}  // namespace dtstop
