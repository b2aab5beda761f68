#include "dtstop/bounds.hpp"

#include <cmath>
#include <numbers>

#include "dtstop/errors.hpp"
#include "dtstop/skeleton.hpp"

namespace dtstop {

double c_constant(std::size_t periods, std::size_t step) {
    if (step >= periods) throw DomainError("c_constant: need j < e(k, T)");
    const double m = static_cast<double>(periods - step + 1);
    return 2.0 * m * std::log2(std::numbers::e * m);
}

BoundReport error_bound_report(const BoundInputs& in) {
    if (!(in.N > 1.0) || !(in.B > 0.0) || !(in.L > 0.0) || !(in.nu > 0.0) || !(in.C > 0.0))
        throw DomainError("error_bound_report: inputs must be positive (N > 1)");
    BoundReport r;
    r.B = in.B;
    r.L = in.L;
    r.nu = in.nu;
    r.C = in.C;
    r.N = in.N;
    r.periods = in.periods;
    r.step = in.step;
    r.c_j = c_constant(in.periods, in.step);
    const double BL = in.B + in.L;
    r.C_BL = 36.0 * BL * BL;
    // C_jk = C (c nu + 1)^4 B^(2 nu) L^(2 c nu) (C (B + L))^(3 nu (1 + c)).
    r.log_C_jk = std::log(in.C) + 4.0 * std::log(r.c_j * in.nu + 1.0) + 2.0 * in.nu * std::log(in.B) +
                 2.0 * r.c_j * in.nu * std::log(in.L) + 3.0 * in.nu * (1.0 + r.c_j) * std::log(in.C * BL);
    const double sqrt_log_cjk = r.log_C_jk > 0.0 ? std::sqrt(r.log_C_jk) : 0.0;
    const double growth = std::pow(6.0, static_cast<double>(in.periods - in.step));
    r.stochastic_term = growth * in.C * BL * BL *
                        (std::sqrt(in.nu * r.c_j) * std::sqrt(std::log(in.N)) + sqrt_log_cjk) / std::sqrt(in.N);
    if (in.alpha) {
        if (!(*in.alpha > 0.0)) throw DomainError("error_bound_report: alpha must be positive");
        r.sample_threshold = 36.0 * r.C_BL * r.C_BL / *in.alpha;
        r.threshold_violated = in.N < *r.sample_threshold;
    }
    return r;
}

double PhiSpec::phi(double k) const {
    if (kind == Kind::geometric) return std::pow(base, -k);
    return std::pow(1.0 + k, -power);
}

double PhiSpec::xi(double y) const {
    if (!(y > 0.0 && y <= 1.0)) throw DomainError("xi: argument must lie in (0, 1]");
    if (kind == Kind::geometric) return -std::log(y) / std::log(base);
    return std::pow(y, -1.0 / power) - 1.0;
}

std::string PhiSpec::describe() const {
    if (kind == Kind::geometric) return "geometric(base=" + std::to_string(base) + ")";
    return "algebraic(p=" + std::to_string(power) + ")";
}

Plan plan_resolution(double e1, double beta, const PhiSpec& phi, int d, double horizon, PlanRounding rounding) {
    if (!(e1 > 0.0 && e1 < 1.0)) throw DomainError("plan_resolution: e1 must lie in (0, 1)");
    if (!(beta > 0.0 && beta <= 1.0)) throw DomainError("plan_resolution: beta must lie in (0, 1]");
    if (phi.kind == PhiSpec::Kind::geometric && !(phi.base > 1.0)) throw DomainError("plan_resolution: base must exceed 1");
    if (phi.kind == PhiSpec::Kind::algebraic && !(phi.power > 0.0)) throw DomainError("plan_resolution: power must be positive");

    Plan plan;
    plan.target_root = std::pow(e1, 1.0 / (2.0 * beta));
    if (rounding == PlanRounding::printed) {
        plan.target_root = std::round(plan.target_root * 1000.0) / 1000.0;
        if (plan.target_root <= 0.0) plan.target_root = 0.001;
        if (plan.target_root > 1.0) plan.target_root = 1.0;
    }
    plan.k_star = phi.xi(plan.target_root);
    if (rounding == PlanRounding::printed) plan.k_star = std::round(plan.k_star * 100.0) / 100.0;
    plan.epsilon = phi.phi(plan.k_star);
    plan.periods = num_periods(SkeletonConfig{plan.epsilon, d, horizon, 0});
    return plan;
}

}  // namespace dtstop
