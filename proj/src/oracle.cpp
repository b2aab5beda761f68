#include "dtstop/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dtstop/errors.hpp"
#include "dtstop/quadrature.hpp"

namespace dtstop {

Oracle::Oracle(std::shared_ptr<const RewardStructure> structure, OracleOptions options)
    : structure_(std::move(structure)),
      options_(options),
      dist_(structure_ ? structure_->epsilon() : 1.0),
      periods_(0) {
    if (!structure_) throw DomainError("oracle: structure must be set");
    if (structure_->dim() != 1) throw DomainError("oracle: only d = 1 is supported");
    if (!structure_->freezes()) throw DomainError("oracle: the horizon split needs payoffs frozen past T");
    if (options_.nodes < 1) throw DomainError("oracle: need at least one quadrature node");
    periods_ = num_periods(SkeletonConfig{structure_->epsilon(), 1, structure_->horizon(), 0});
    if (periods_ > 6) throw InstanceTooLarge("oracle: " + std::to_string(periods_) + " periods exceed the limit of 6");
    const double b = static_cast<double>(branching());
    if (std::pow(b, static_cast<double>(periods_)) > options_.leaf_budget)
        throw InstanceTooLarge("oracle: (2 * nodes)^periods exceeds the leaf budget");

    std::size_t layer_size = 1;
    std::size_t total = 0;
    for (std::size_t j = 0; j <= periods_; ++j) {
        if (j > 0 && total + layer_size > options_.table_limit) break;
        table_.emplace_back(layer_size);
        total += layer_size;
        stored_layers_ = j;
        layer_size *= branching();
    }

    PathState root;
    structure_->reset(root);
    building_ = true;
    value_at(root, 0);
    building_ = false;
}

Oracle::Layer Oracle::layer(double remaining) const {
    Layer out;
    if (!(remaining > 0.0)) return out;
    const double eps2 = dist_.mean();
    const double top = remaining / (remaining + eps2);
    const auto& rule = gauss_legendre(options_.nodes);
    double mass = 0.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
        const double v = 0.5 * (rule.nodes[k] + 1.0);
        const double u = top * v * v * (3.0 - 2.0 * v);
        const double du = top * 6.0 * v * (1.0 - v);
        const double one_minus = 1.0 - u;
        const double s = eps2 * u / one_minus;
        const double w = rule.weights[k] * 0.5 * du * eps2 / (one_minus * one_minus) * dist_.density(s);
        out.times.push_back(s);
        out.weights.push_back(w);
        mass += w;
    }
    out.tail = dist_.survival(remaining);
    const double target = 1.0 - out.tail;
    if (mass > 0.0)
        for (double& w : out.weights) w *= target / mass;
    return out;
}

double Oracle::value_at(PathState& state, std::size_t index) const {
    const std::size_t j = state.steps();
    const double Z = state.payoffs.back();
    double U = Z;
    double V = Z;
    if (j < periods_ && !state.frozen) {
        U = continuation_at(state, index);
        V = std::max(Z, U);
    }
    if (building_ && j <= stored_layers_)
        table_[j][index] = {state.epochs.back(), Z, U, V, true, state.frozen};
    return V;
}

double Oracle::continuation_at(PathState& state, std::size_t index) const {
    const double Z = state.payoffs.back();
    const Layer lay = layer(structure_->horizon() - state.epochs.back());
    double acc = Z * lay.tail;
    const Checkpoint cp = state.checkpoint();
    const std::size_t b = branching();
    for (std::size_t i = 0; i < lay.times.size(); ++i) {
        for (int sign : {-1, 1}) {
            structure_->push(state, {lay.times[i], Mark{1, static_cast<double>(sign)}});
            const double v = value_at(state, index * b + 2 * i + (sign > 0 ? 1 : 0));
            state.rewind(cp);
            acc += 0.5 * lay.weights[i] * v;
        }
    }
    return acc;
}

double Oracle::continuation(History history) const {
    if (history.size() >= periods_) throw ShapeError("oracle: continuation needs a history shorter than the period count");
    if (history.empty()) return continuation0();
    PathState state = structure_->walk(history);
    if (state.frozen) return state.payoffs.back();
    return continuation_at(state, 0);
}

double Oracle::value(History history) const {
    if (history.size() > periods_) throw ShapeError("oracle: history longer than the period count");
    if (history.empty()) return value();
    PathState state = structure_->walk(history);
    return value_at(state, 0);
}

VariationalReport variational_check(const Oracle& oracle) {
    VariationalReport report;
    const auto& table = oracle.table();
    const std::size_t b = oracle.branching();
    const double T = oracle.structure().horizon();
    for (std::size_t j = 0; j < table.size(); ++j) {
        for (std::size_t k = 0; k < table[j].size(); ++k) {
            const auto& node = table[j][k];
            if (!node.visited) continue;
            ++report.nodes;
            report.max_residual = std::max(report.max_residual, std::abs(node.V - std::max(node.Z, node.U)));
            if (node.U > node.V + 1e-12 || node.Z > node.V + 1e-12) ++report.order_violations;
            if (j == oracle.periods())
                report.terminal_residual = std::max(report.terminal_residual, std::abs(node.V - node.Z));
            if (j + 1 < table.size() && j < oracle.periods() && !node.frozen) {
                const auto lay = oracle.layer(T - node.clock);
                double U = node.Z * lay.tail;
                for (std::size_t i = 0; i < lay.times.size(); ++i)
                    for (std::size_t s = 0; s < 2; ++s) U += 0.5 * lay.weights[i] * table[j + 1][k * b + 2 * i + s].V;
                report.max_recursion_residual = std::max(report.max_recursion_residual, std::abs(U - node.U));
            }
        }
    }
    return report;
}

std::vector<std::vector<Region>> classify_regions(const Oracle& oracle, double tol) {
    std::vector<std::vector<Region>> out;
    for (const auto& layer : oracle.table()) {
        auto& labels = out.emplace_back(layer.size(), Region::none);
        for (std::size_t k = 0; k < layer.size(); ++k) {
            if (!layer[k].visited) continue;
            labels[k] = std::abs(layer[k].Z - layer[k].V) <= tol ? Region::stopping : Region::continuation;
        }
    }
    return out;
}

}  // namespace dtstop
