#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "dtstop/exit_time.hpp"
#include "dtstop/skeleton.hpp"
#include "dtstop/structures.hpp"

namespace dtstop {

struct OracleOptions {
    /// Gauss-Legendre nodes per time layer.
    int nodes = 32;
    /// Largest allowed (2 * nodes)^periods.
    double leaf_budget = 2e9;
    /// Nodes kept in the tabulated top layers of the tree.
    std::size_t table_limit = 4'000'000;
};

/// One tabulated node of the quadrature tree.
struct OracleNode {
    double clock = 0.0;
    double Z = 0.0;
    double U = 0.0;
    double V = 0.0;
    bool visited = false;
    bool frozen = false;
};

enum class Region : std::int8_t { none = -1, continuation = 0, stopping = 1 };

/// Exact dynamic programming for d = 1 on the quadrature tree of the skeleton:
///
///   U_j(b) = int max{Z_{j+1}, U_{j+1}}(b, s, i) nu(ds di | b),   V_j = max{Z_j, U_j},
///
/// with the d = 1 kernel 1/2 f(s) for each sign. The time integral is split at
/// the horizon: beyond it every payoff is frozen, which contributes
/// Z_j * S(T - t_j) in closed form; the rest uses Gauss-Legendre in v, where
/// u = s / (s + eps^2) = u_max (3v^2 - 2v^3) grades the nodes toward both ends,
/// with weights rescaled to carry exactly the mass 1 - S(T - t_j).
class Oracle {
public:
    Oracle(std::shared_ptr<const RewardStructure> structure, OracleOptions options = {});

    std::size_t periods() const noexcept { return periods_; }
    const OracleOptions& options() const noexcept { return options_; }
    const RewardStructure& structure() const noexcept { return *structure_; }

    /// V_0 (also fills the node table).
    double value() const { return table_.front().front().V; }
    double continuation0() const { return table_.front().front().U; }

    /// U_j and V_j at an arbitrary history of length j < periods (V only for j = periods).
    double continuation(History history) const;
    double value(History history) const;

    /// Tabulated layers 0..L; children of node k in layer j sit at k * 2n + 2i + (sign > 0).
    const std::vector<std::vector<OracleNode>>& table() const noexcept { return table_; }
    std::size_t branching() const noexcept { return 2 * static_cast<std::size_t>(options_.nodes); }

    /// Quadrature nodes and weights on (0, s) and the mass S(s) beyond it.
    struct Layer {
        std::vector<double> times;
        std::vector<double> weights;
        double tail = 1.0;
    };
    Layer layer(double remaining) const;

private:
    double value_at(PathState& state, std::size_t index) const;
    double continuation_at(PathState& state, std::size_t index) const;

    std::shared_ptr<const RewardStructure> structure_;
    OracleOptions options_;
    ExitTimeDistribution dist_;
    std::size_t periods_;
    std::size_t stored_layers_ = 0;
    mutable std::vector<std::vector<OracleNode>> table_;
    mutable bool building_ = false;
};

/// max over tabulated nodes of |V - max(Z, U)|, together with the violations of
/// U <= V, Z <= V and of U against the quadrature of its stored children.
struct VariationalReport {
    double max_residual = 0.0;
    double max_recursion_residual = 0.0;
    std::size_t nodes = 0;
    std::size_t order_violations = 0;
    double terminal_residual = 0.0;
};
VariationalReport variational_check(const Oracle& oracle);

/// stopping iff |Z - V| <= tol, per tabulated node (none for unvisited slots).
std::vector<std::vector<Region>> classify_regions(const Oracle& oracle, double tol = 1e-10);

}  // namespace dtstop
