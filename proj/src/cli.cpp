#include "dtstop/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dtstop/binomial.hpp"
#include "dtstop/bounds.hpp"
#include "dtstop/exit_time.hpp"
#include "dtstop/kernel.hpp"
#include "dtstop/oracle.hpp"
#include "dtstop/parallel.hpp"
#include "dtstop/quadrature.hpp"

namespace dtstop {

using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

const char* const kCsvColumns[] = {"command",    "seed",         "epsilon",        "d",
                                   "T",          "periods",      "N",              "V_hat",
                                   "U0_hat",     "lower_bound",  "lower_bound_se", "oracle_value",
                                   "max_residual", "wall_ms"};

void fail(const std::string& field, const std::string& what) { throw ConfigError(field + ": " + what); }

void require_one_of(const std::string& field, const std::string& value, std::initializer_list<const char*> allowed) {
    std::string list;
    for (const char* a : allowed) {
        if (value == a) return;
        list += list.empty() ? a : std::string(", ") + a;
    }
    fail(field, "'" + value + "' is not one of " + list);
}

// Field-level readers. Every JSON section is consumed key by key so that
// leftovers can be reported as unknown.
class Section {
public:
    Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
    }

    bool has(const std::string& key) const { return node_.contains(key); }
    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* take(const std::string& key) {
        seen_.push_back(key);
        auto it = node_.find(key);
        return it == node_.end() || it->is_null() ? nullptr : &*it;
    }

    void read(const std::string& key, double& out) {
        if (const json* v = take(key)) {
            if (!v->is_number()) fail(field(key), "expected a number");
            out = v->get<double>();
        }
    }
    void read(const std::string& key, std::optional<double>& out) {
        if (const json* v = take(key)) {
            if (!v->is_number()) fail(field(key), "expected a number");
            out = v->get<double>();
        }
    }
    void read(const std::string& key, int& out) {
        if (const json* v = take(key)) out = static_cast<int>(integer(key, *v));
    }
    void read(const std::string& key, std::uint64_t& out) {
        if (const json* v = take(key)) {
            if (v->is_number_unsigned()) {
                out = v->get<std::uint64_t>();
                return;
            }
            const auto i = integer(key, *v);
            if (i < 0) fail(field(key), "must be non-negative");
            out = static_cast<std::uint64_t>(i);
        }
    }
    void read(const std::string& key, bool& out) {
        if (const json* v = take(key)) {
            if (!v->is_boolean()) fail(field(key), "expected true or false");
            out = v->get<bool>();
        }
    }
    void read(const std::string& key, std::string& out) {
        if (const json* v = take(key)) {
            if (!v->is_string()) fail(field(key), "expected a string");
            out = v->get<std::string>();
        }
    }
    void read(const std::string& key, Parameters& out) {
        if (const json* v = take(key)) {
            if (!v->is_object()) fail(field(key), "expected an object of numbers");
            out.clear();
            for (auto it = v->begin(); it != v->end(); ++it) {
                if (!it->is_number()) fail(field(key) + "." + it.key(), "expected a number");
                out[it.key()] = it->get<double>();
            }
        }
    }
    void read(const std::string& key, std::vector<double>& out) {
        if (const json* v = take(key)) {
            if (!v->is_array()) fail(field(key), "expected an array");
            out.clear();
            for (const auto& x : *v) {
                if (!x.is_number()) fail(field(key), "expected numbers");
                out.push_back(x.get<double>());
            }
        }
    }
    void read(const std::string& key, std::vector<std::uint64_t>& out) {
        if (const json* v = take(key)) {
            if (!v->is_array()) fail(field(key), "expected an array");
            out.clear();
            for (const auto& x : *v) {
                const auto i = integer(key, x);
                if (i < 0) fail(field(key), "entries must be non-negative");
                out.push_back(static_cast<std::size_t>(i));
            }
        }
    }

    Section sub(const std::string& key) {
        const json* v = take(key);
        static const json empty = json::object();
        return Section(v ? *v : empty, field(key));
    }

    void finish() const {
        for (auto it = node_.begin(); it != node_.end(); ++it)
            if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end()) fail(field(it.key()), "unknown key");
    }

private:
    std::int64_t integer(const std::string& key, const json& v) const {
        if (v.is_number_integer()) return v.get<std::int64_t>();
        if (v.is_number_float()) {
            const double x = v.get<double>();
            if (std::floor(x) == x && std::abs(x) < 9e18) return static_cast<std::int64_t>(x);
        }
        fail(field(key), "expected an integer");
        return 0;
    }

    const json& node_;
    std::string path_;
    std::vector<std::string> seen_;
};

std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
    std::size_t line = 1, column = 1;
    const std::size_t end = std::min(byte == 0 ? 0 : byte - 1, text.size());
    for (std::size_t i = 0; i < end; ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

std::filesystem::path output_directory(const RunConfig& config) {
    if (!config.output_dir.empty()) return config.output_dir;
    if (const char* env = std::getenv("DTSTOP_OUTPUT_DIR"); env && *env) return env;
    return "dtstop-runs";
}

double now_ms() {
    using namespace std::chrono;
    return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

json number_or_null(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

std::string csv_cell(const json& v) {
    if (v.is_null()) return "";
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) {
        std::ostringstream os;
        os << std::setprecision(17) << v.get<double>();
        return os.str();
    }
    return v.dump();
}

// One CSV row per result; missing columns stay empty.
struct Row {
    json cells = json::object();
};

Row base_row(const RunConfig& c) {
    Row r;
    r.cells["command"] = c.command;
    r.cells["seed"] = c.seed;
    r.cells["epsilon"] = c.epsilon;
    r.cells["d"] = c.d;
    r.cells["T"] = c.T;
    return r;
}

void print_rows(std::ostream& out, const std::string& format, const std::vector<Row>& rows) {
    if (format == "json") return;
    if (format == "csv") {
        bool first = true;
        for (const char* c : kCsvColumns) {
            out << (first ? "" : ",") << c;
            first = false;
        }
        out << "\n";
        for (const auto& r : rows) {
            first = true;
            for (const char* c : kCsvColumns) {
                out << (first ? "" : ",") << (r.cells.contains(c) ? csv_cell(r.cells[c]) : "");
                first = false;
            }
            out << "\n";
        }
        return;
    }
    std::vector<const char*> used;
    for (const char* c : kCsvColumns)
        for (const auto& r : rows)
            if (r.cells.contains(c) && !r.cells[c].is_null() && std::string(c) != "command") {
                used.push_back(c);
                break;
            }
    for (const char* c : used) out << std::setw(16) << c;
    out << "\n";
    for (const auto& r : rows) {
        for (const char* c : used) {
            const json& v = r.cells.contains(c) ? r.cells[c] : json(nullptr);
            if (v.is_number_float()) out << std::setw(16) << std::setprecision(7) << v.get<double>();
            else out << std::setw(16) << (v.is_null() ? "-" : csv_cell(v));
        }
        out << "\n";
    }
}

void append_files(const RunConfig& config, const json& record, const std::vector<Row>& rows) {
    namespace fs = std::filesystem;
    const fs::path dir = output_directory(config);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
    const auto mode = config.force ? std::ios::out | std::ios::trunc : std::ios::out | std::ios::app;

    std::ofstream runs(dir / "runs.jsonl", mode);
    if (!runs) throw Error("cannot open " + (dir / "runs.jsonl").string());
    runs << record.dump() << "\n";

    const fs::path csv_path = dir / "results.csv";
    const bool header = config.force || !fs::exists(csv_path) || fs::file_size(csv_path) == 0;
    std::ofstream csv(csv_path, mode);
    if (!csv) throw Error("cannot open " + csv_path.string());
    if (header) {
        bool first = true;
        for (const char* c : kCsvColumns) {
            csv << (first ? "" : ",") << c;
            first = false;
        }
        csv << "\n";
    }
    for (const auto& r : rows) {
        bool first = true;
        for (const char* c : kCsvColumns) {
            csv << (first ? "" : ",") << (r.cells.contains(c) ? csv_cell(r.cells[c]) : "");
            first = false;
        }
        csv << "\n";
    }
}

json fit_json(const StepFit& f) {
    return {{"step", f.step},
            {"degree", f.degree},
            {"inputs", f.inputs},
            {"basis", f.fit.coefficients.size()},
            {"rank", f.fit.rank},
            {"risk", f.fit.risk},
            {"raw_risk", f.fit.raw_risk},
            {"bound", f.fit.bound},
            {"samples", f.fit.samples}};
}

struct OracleRun {
    double value = 0.0;
    double continuation0 = 0.0;
    VariationalReport report;
    std::optional<double> refined;
};

OracleRun run_oracle(const std::shared_ptr<const RewardStructure>& structure, int nodes, bool refine) {
    OracleRun r;
    Oracle oracle(structure, OracleOptions{nodes});
    r.value = oracle.value();
    r.continuation0 = oracle.continuation0();
    r.report = variational_check(oracle);
    if (refine) {
        const int finer = nodes + nodes / 2;
        try {
            Oracle fine(structure, OracleOptions{finer});
            r.refined = fine.value();
        } catch (const InstanceTooLarge&) {
            // the finer grid does not fit the budget; report the coarse value alone
        }
    }
    return r;
}

json oracle_json(const OracleRun& r, int nodes) {
    json j = {{"value", r.value},
              {"continuation0", r.continuation0},
              {"nodes", nodes},
              {"max_residual", r.report.max_residual},
              {"max_recursion_residual", r.report.max_recursion_residual},
              {"order_violations", r.report.order_violations},
              {"terminal_residual", r.report.terminal_residual},
              {"tabulated_nodes", r.report.nodes}};
    j["refined_value"] = number_or_null(r.refined);
    j["refinement_gap"] = r.refined ? json(std::abs(*r.refined - r.value)) : json(nullptr);
    return j;
}

json solve_command(const RunConfig& c, std::vector<Row>& rows, json& timings) {
    const double t0 = now_ms();
    const LsConfig ls = make_ls_config(c);
    const LsResult r = ls_solve(ls);
    json results = {{"V_hat", r.value},
                    {"U0_hat", r.continuation0},
                    {"Z0", r.payoff0},
                    {"periods", r.periods},
                    {"paths", c.paths},
                    {"structure", ls.structure->name()}};
    results["lower_bound"] = r.fresh_paths ? json(r.lower_bound) : json(nullptr);
    results["lower_bound_se"] = r.fresh_paths ? json(r.lower_bound_se) : json(nullptr);
    results["fresh_paths"] = r.fresh_paths;
    json fits = json::array();
    for (const auto& f : r.fits) fits.push_back(fit_json(f));
    results["fits"] = fits;
    timings["simulate_ms"] = r.simulate_ms;
    timings["regress_ms"] = r.regress_ms;
    timings["lower_bound_ms"] = r.lower_bound_ms;

    Row row = base_row(c);
    row.cells["periods"] = r.periods;
    row.cells["N"] = c.paths;
    row.cells["V_hat"] = r.value;
    row.cells["U0_hat"] = r.continuation0;
    row.cells["lower_bound"] = results["lower_bound"];
    row.cells["lower_bound_se"] = results["lower_bound_se"];

    if (c.with_oracle) {
        const double o0 = now_ms();
        const OracleRun o = run_oracle(ls.structure, c.nodes, c.refine);
        timings["oracle_ms"] = now_ms() - o0;
        results["oracle"] = oracle_json(o, c.nodes);
        results["abs_error"] = std::abs(r.value - o.value);
        row.cells["oracle_value"] = o.value;
        row.cells["max_residual"] = o.report.max_residual;
    }
    row.cells["wall_ms"] = now_ms() - t0;
    rows.push_back(row);
    return results;
}

json oracle_command(const RunConfig& c, std::vector<Row>& rows) {
    const double t0 = now_ms();
    const auto structure = make_structure(c);
    const OracleRun o = run_oracle(structure, c.nodes, c.refine);
    json results = oracle_json(o, c.nodes);
    results["periods"] = num_periods(SkeletonConfig{c.epsilon, c.d, c.T, c.seed});
    results["structure"] = structure->name();
    Row row = base_row(c);
    row.cells["periods"] = results["periods"];
    row.cells["oracle_value"] = o.value;
    row.cells["U0_hat"] = o.continuation0;
    row.cells["max_residual"] = o.report.max_residual;
    row.cells["wall_ms"] = now_ms() - t0;
    rows.push_back(row);
    return results;
}

json converge_command(const RunConfig& c, std::vector<Row>& rows) {
    const std::vector<double> epsilons = c.sweep_epsilons.empty() ? std::vector<double>{c.epsilon} : c.sweep_epsilons;
    const std::vector<std::size_t> sizes = c.sweep_paths.empty() ? std::vector<std::size_t>{c.paths} : c.sweep_paths;
    json levels = json::array();
    for (double eps : epsilons) {
        RunConfig level = c;
        level.epsilon = eps;
        level.k.reset();
        const auto structure = make_structure(level);
        std::optional<double> reference;
        json level_json = {{"epsilon", eps}, {"periods", num_periods(SkeletonConfig{eps, c.d, c.T, c.seed})}};
        if (c.d == 1) {
            try {
                const OracleRun o = run_oracle(structure, c.nodes, false);
                reference = o.value;
                level_json["max_residual"] = o.report.max_residual;
            } catch (const InstanceTooLarge& e) {
                level_json["oracle_skipped"] = e.what();
            }
        }
        level_json["oracle_value"] = number_or_null(reference);
        json sweep = json::array();
        for (std::size_t n : sizes) {
            std::vector<double> values;
            for (std::size_t rep = 0; rep < c.replications; ++rep) {
                const double t0 = now_ms();
                RunConfig run = level;
                run.paths = n;
                run.seed = c.replications == 1 ? c.seed : derive_seed(c.seed, StreamPurpose::validation, rep);
                LsConfig ls = make_ls_config(run);
                ls.structure = structure;
                const LsResult r = ls_solve(ls);
                values.push_back(r.value);
                Row row = base_row(run);
                row.cells["periods"] = r.periods;
                row.cells["N"] = n;
                row.cells["V_hat"] = r.value;
                row.cells["U0_hat"] = r.continuation0;
                if (r.fresh_paths) {
                    row.cells["lower_bound"] = r.lower_bound;
                    row.cells["lower_bound_se"] = r.lower_bound_se;
                }
                row.cells["oracle_value"] = number_or_null(reference);
                row.cells["wall_ms"] = now_ms() - t0;
                rows.push_back(row);
            }
            double mean = 0.0, mae = 0.0;
            for (double v : values) mean += v / values.size();
            if (reference)
                for (double v : values) mae += std::abs(v - *reference) / values.size();
            json entry = {{"N", n}, {"mean_V_hat", mean}, {"values", values}};
            entry["mean_abs_error"] = reference ? json(mae) : json(nullptr);
            sweep.push_back(entry);
        }
        level_json["sweep"] = sweep;
        levels.push_back(level_json);
    }
    return {{"levels", levels}};
}

PhiSpec phi_spec(const RunConfig& c) {
    PhiSpec phi;
    phi.kind = c.phi == "algebraic" ? PhiSpec::Kind::algebraic : PhiSpec::Kind::geometric;
    phi.base = c.phi_base;
    phi.power = c.phi_power;
    return phi;
}

json plan_command(const RunConfig& c, std::vector<Row>& rows) {
    const double t0 = now_ms();
    const PhiSpec phi = phi_spec(c);
    const Plan p = plan_resolution(c.e1, c.beta, phi, c.d, c.T,
                                   c.rounding == "exact" ? PlanRounding::exact : PlanRounding::printed);
    Row row = base_row(c);
    row.cells["epsilon"] = p.epsilon;
    row.cells["periods"] = p.periods;
    row.cells["wall_ms"] = now_ms() - t0;
    rows.push_back(row);
    return {{"e1", c.e1},          {"beta", c.beta},       {"phi", phi.describe()},
            {"rounding", c.rounding}, {"target_root", p.target_root}, {"k_star", p.k_star},
            {"epsilon", p.epsilon},   {"periods", p.periods}};
}

// Cheap numerical self-checks of the exit-time law and the kernel.
json validate_command(const RunConfig& c, std::vector<Row>& rows) {
    const double t0 = now_ms();
    const ExitTimeDistribution dist(c.epsilon);
    const double e2 = c.epsilon * c.epsilon;
    json checks = json::array();
    bool ok = true;
    auto check = [&](const std::string& name, double value, double target, double tol) {
        const bool pass = std::abs(value - target) <= tol;
        ok = ok && pass;
        checks.push_back({{"name", name}, {"value", value}, {"target", target}, {"tolerance", tol}, {"pass", pass}});
    };

    const auto mass = integrate_time([&](double t) { return dist.density(t); }, 0.0, INFINITY, e2);
    check("density_mass", mass.value, 1.0, 1e-8);
    const auto mean = integrate_time([&](double t) { return dist.survival(t); }, 0.0, INFINITY, e2);
    check("mean_over_eps2", mean.value / e2, 1.0, 1e-8);
    const auto a = ExitTimeDistribution::spectral_series(0.1, 1e-15);
    const auto b = ExitTimeDistribution::reflection_series(0.1, 1e-15);
    check("branch_gap_survival", a.survival, b.survival, 1e-10);
    check("branch_gap_density", a.density, b.density, 1e-10);

    const std::size_t draws = 100000;
    double sum = 0.0, sum2 = 0.0;
    Stream stream(c.seed, StreamPurpose::oracle_check, 0);
    for (std::size_t i = 0; i < draws; ++i) {
        const double x = dist.sample(stream) / e2;
        sum += x;
        sum2 += x * x;
    }
    const double m = sum / draws;
    const double se = std::sqrt((sum2 / draws - m * m) / draws);
    check("sample_mean_over_eps2", m, 1.0, 4.0 * se);

    const int dim = std::max(c.d, 2);
    Stream path_stream(c.seed, StreamPurpose::oracle_check, 1);
    const SkeletonPath path = sample_path(SkeletonConfig{c.epsilon, dim, c.T, c.seed}, path_stream);
    const std::size_t steps = std::min<std::size_t>(path.increments.size(), 3);
    const TransitionKernel kernel(c.epsilon, dim);
    const HistoryStats stats =
        history_stats(History(path.increments.data(), steps), dim);
    double total = 0.0;
    for (int j = 1; j <= dim; ++j) {
        const double win = kernel.coordinate_win_prob(stats, j);
        const double both = kernel.transition_prob(stats, j, 1, 0.0, INFINITY) +
                            kernel.transition_prob(stats, j, -1, 0.0, INFINITY);
        check("kernel_dual_route_" + std::to_string(j), both, win, 1e-7);
        total += both;
    }
    check("kernel_mass", total, 1.0, 1e-7);

    Row row = base_row(c);
    row.cells["wall_ms"] = now_ms() - t0;
    rows.push_back(row);
    return {{"ok", ok}, {"checks", checks}};
}

json bench_command(const RunConfig& c, std::vector<Row>& rows, json& timings) {
    const double t0 = now_ms();
    BinomialPut put;
    put.spot = c.spot;
    put.strike = c.strike;
    put.rate = c.rate;
    put.volatility = c.volatility;
    put.maturity = c.T;
    put.steps = c.tree_steps;
    const double american = american_put_crr(put);
    const double european = european_put_crr(put);
    timings["tree_ms"] = now_ms() - t0;

    RunConfig run = c;
    run.kind = "euler";
    run.coefficients = "geometric";
    run.coefficient_params = {{"x0", c.spot}, {"r", c.rate}, {"nu", c.volatility}};
    run.payoff = "put";
    run.payoff_params = {{"K", c.strike}, {"r", c.rate}};
    run.features = "state_clock";
    run.state_ref = c.spot;
    run.bound_policy = "constant";
    run.bound = c.strike;
    run.payoff_bound = c.strike;
    const LsResult r = ls_solve(make_ls_config(run));
    timings["simulate_ms"] = r.simulate_ms;
    timings["regress_ms"] = r.regress_ms;
    timings["lower_bound_ms"] = r.lower_bound_ms;

    Row row = base_row(c);
    row.cells["periods"] = r.periods;
    row.cells["N"] = c.paths;
    row.cells["V_hat"] = r.value;
    row.cells["U0_hat"] = r.continuation0;
    if (r.fresh_paths) {
        row.cells["lower_bound"] = r.lower_bound;
        row.cells["lower_bound_se"] = r.lower_bound_se;
    }
    row.cells["oracle_value"] = american;
    row.cells["wall_ms"] = now_ms() - t0;
    rows.push_back(row);

    json results = {{"american_tree", american},
                    {"european_tree", european},
                    {"V_hat", r.value},
                    {"periods", r.periods},
                    {"relative_error", std::abs(r.value - american) / american}};
    results["lower_bound"] = r.fresh_paths ? json(r.lower_bound) : json(nullptr);
    results["lower_bound_se"] = r.fresh_paths ? json(r.lower_bound_se) : json(nullptr);
    return results;
}

template <class T>
struct Override {
    T value{};
};

}  // namespace

void RunConfig::validate() const {
    require_one_of("command", command, {"solve", "oracle", "converge", "plan", "validate", "bench"});
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) fail("epsilon", "must be positive");
    if (k && !(std::isfinite(*k))) fail("k", "must be finite");
    if (d < 1) fail("d", "must be at least 1");
    if (!(T > 0.0) || !std::isfinite(T)) fail("T", "must be positive");
    require_one_of("kind", kind, {"euler", "clock_index"});
    if (kind == "euler" && d != 1) fail("d", "the euler structure is one-dimensional");
    if (paths < 2) fail("paths", "must be at least 2");
    require_one_of("degree_policy", degree_policy, {"schedule", "fixed"});
    if (degree < 0) fail("degree", "must be non-negative");
    require_one_of("bound_policy", bound_policy, {"payoff", "constant", "twice_target"});
    if (!(bound > 0.0)) fail("bound", "must be positive");
    if (!(payoff_bound >= 1.0)) fail("payoff_bound", "must be at least 1");
    if (truncation && !(*truncation > 0.0)) fail("truncation", "must be positive");
    require_one_of("features", features, {"full", "state_clock"});
    if (features == "state_clock" && kind != "euler") fail("features", "state_clock needs the euler structure");
    if (!(state_ref > 0.0)) fail("state_ref", "must be positive");
    if (nodes < 2) fail("nodes", "must be at least 2");
    if (!(e1 > 0.0 && e1 < 1.0)) fail("e1", "must lie in (0, 1)");
    if (!(beta > 0.0 && beta <= 1.0)) fail("beta", "must lie in (0, 1]");
    require_one_of("phi", phi, {"geometric", "algebraic"});
    if (!(phi_base > 1.0)) fail("phi_base", "must exceed 1");
    if (!(phi_power > 0.0)) fail("phi_power", "must be positive");
    require_one_of("rounding", rounding, {"printed", "exact"});
    for (std::size_t n : sweep_paths)
        if (n < 2) fail("sweep_paths", "entries must be at least 2");
    for (double e : sweep_epsilons)
        if (!(e > 0.0)) fail("sweep_epsilons", "entries must be positive");
    if (replications < 1) fail("replications", "must be at least 1");
    if (!(spot > 0.0)) fail("spot", "must be positive");
    if (!(strike > 0.0)) fail("strike", "must be positive");
    if (!(volatility > 0.0)) fail("volatility", "must be positive");
    if (tree_steps < 1) fail("tree_steps", "must be at least 1");
    require_one_of("format", format, {"table", "csv", "json"});
}

RunConfig parse_config(const std::string& text, const std::string& source) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, column] = line_column(text, e.byte);
        throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + e.what());
    }
    RunConfig c;
    Section top(root, "");
    top.read("command", c.command);
    top.read("seed", c.seed);
    {
        Section s = top.sub("skeleton");
        s.read("epsilon", c.epsilon);
        s.read("k", c.k);
        s.read("d", c.d);
        s.read("T", c.T);
        s.finish();
    }
    {
        Section s = top.sub("structure");
        s.read("kind", c.kind);
        s.read("coefficients", c.coefficients);
        s.read("coefficient_params", c.coefficient_params);
        s.read("payoff", c.payoff);
        s.read("payoff_params", c.payoff_params);
        s.finish();
    }
    {
        Section s = top.sub("solver");
        s.read("paths", c.paths);
        s.read("fresh_paths", c.fresh_paths);
        s.read("degree_policy", c.degree_policy);
        s.read("degree", c.degree);
        s.read("bound_policy", c.bound_policy);
        s.read("bound", c.bound);
        s.read("payoff_bound", c.payoff_bound);
        s.read("truncation", c.truncation);
        s.read("features", c.features);
        s.read("state_ref", c.state_ref);
        s.read("with_oracle", c.with_oracle);
        s.finish();
    }
    {
        Section s = top.sub("oracle");
        s.read("nodes", c.nodes);
        s.read("refine", c.refine);
        s.finish();
    }
    {
        Section s = top.sub("plan");
        s.read("e1", c.e1);
        s.read("beta", c.beta);
        s.read("phi", c.phi);
        s.read("phi_base", c.phi_base);
        s.read("phi_power", c.phi_power);
        s.read("rounding", c.rounding);
        s.finish();
    }
    {
        Section s = top.sub("converge");
        s.read("paths", c.sweep_paths);
        s.read("epsilons", c.sweep_epsilons);
        s.read("replications", c.replications);
        s.finish();
    }
    {
        Section s = top.sub("bench");
        s.read("spot", c.spot);
        s.read("strike", c.strike);
        s.read("rate", c.rate);
        s.read("volatility", c.volatility);
        s.read("tree_steps", c.tree_steps);
        s.finish();
    }
    {
        Section s = top.sub("output");
        s.read("dir", c.output_dir);
        s.read("format", c.format);
        s.read("force", c.force);
        s.finish();
    }
    top.finish();
    if (c.k) c.epsilon = std::exp2(-*c.k);
    c.validate();
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open configuration file");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str(), path);
}

json to_json(const RunConfig& c) {
    json skeleton = {{"epsilon", c.epsilon}, {"d", c.d}, {"T", c.T}};
    skeleton["k"] = number_or_null(c.k);
    json solver = {{"paths", c.paths},
                   {"fresh_paths", c.fresh_paths},
                   {"degree_policy", c.degree_policy},
                   {"degree", c.degree},
                   {"bound_policy", c.bound_policy},
                   {"bound", c.bound},
                   {"payoff_bound", c.payoff_bound},
                   {"features", c.features},
                   {"state_ref", c.state_ref},
                   {"with_oracle", c.with_oracle}};
    solver["truncation"] = number_or_null(c.truncation);
    return {{"command", c.command},
            {"seed", c.seed},
            {"skeleton", skeleton},
            {"structure",
             {{"kind", c.kind},
              {"coefficients", c.coefficients},
              {"coefficient_params", c.coefficient_params},
              {"payoff", c.payoff},
              {"payoff_params", c.payoff_params}}},
            {"solver", solver},
            {"oracle", {{"nodes", c.nodes}, {"refine", c.refine}}},
            {"plan",
             {{"e1", c.e1},
              {"beta", c.beta},
              {"phi", c.phi},
              {"phi_base", c.phi_base},
              {"phi_power", c.phi_power},
              {"rounding", c.rounding}}},
            {"converge", {{"paths", c.sweep_paths}, {"epsilons", c.sweep_epsilons}, {"replications", c.replications}}},
            {"bench",
             {{"spot", c.spot},
              {"strike", c.strike},
              {"rate", c.rate},
              {"volatility", c.volatility},
              {"tree_steps", c.tree_steps}}},
            {"output", {{"dir", c.output_dir}, {"format", c.format}, {"force", c.force}}}};
}

CommandLine parse_command_line(int argc, const char* const* argv) {
    CLI::App app{"Optimal stopping on the random-walk skeleton of Brownian motion", "dtstop"};
    app.set_version_flag("--version", kVersion);
    app.fallthrough();
    app.require_subcommand(1);
    const char* commands[][2] = {{"solve", "least-squares Monte Carlo estimate of V_0"},
                                 {"oracle", "exact quadrature-tree value for small d = 1 instances"},
                                 {"converge", "sweep N and epsilon against the oracle"},
                                 {"plan", "resolution k* for a target error"},
                                 {"validate", "numerical self-checks of the exit-time law and kernel"},
                                 {"bench", "American put against a binomial tree"}};
    for (const auto& cmd : commands) app.add_subcommand(cmd[0], cmd[1]);

    CommandLine result;
    std::string config_path;
    app.add_option("-c,--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
    app.add_option("-j,--threads", result.threads, "worker threads")->check(CLI::PositiveNumber);

    std::vector<std::function<void(RunConfig&)>> overrides;
    auto opt = [&](const std::string& flags, auto member, const std::string& help) {
        using T = std::remove_reference_t<decltype(std::declval<RunConfig&>().*member)>;
        auto holder = std::make_shared<Override<T>>();
        CLI::Option* o = app.add_option(flags, holder->value, help);
        overrides.push_back([o, holder, member](RunConfig& c) {
            if (o->count() > 0) c.*member = holder->value;
        });
    };
    auto optional = [&](const std::string& flags, std::optional<double> RunConfig::*member, const std::string& help) {
        auto holder = std::make_shared<Override<double>>();
        CLI::Option* o = app.add_option(flags, holder->value, help);
        overrides.push_back([o, holder, member](RunConfig& c) {
            if (o->count() > 0) c.*member = holder->value;
        });
    };
    auto params = [&](const std::string& flags, Parameters RunConfig::*member, const std::string& help) {
        auto holder = std::make_shared<Override<std::vector<std::string>>>();
        CLI::Option* o = app.add_option(flags, holder->value, help);
        overrides.push_back([o, holder, member, flags](RunConfig& c) {
            if (o->count() == 0) return;
            for (const auto& kv : holder->value) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos || eq == 0) fail(flags, "expected key=value, got '" + kv + "'");
                try {
                    (c.*member)[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
                } catch (const std::exception&) {
                    fail(flags, "'" + kv.substr(eq + 1) + "' is not a number");
                }
            }
        });
    };
    auto flag = [&](const std::string& flags, bool RunConfig::*member, const std::string& help) {
        auto holder = std::make_shared<Override<bool>>();
        CLI::Option* o = app.add_flag(flags, holder->value, help);
        overrides.push_back([o, holder, member](RunConfig& c) {
            if (o->count() > 0) c.*member = holder->value;
        });
    };

    opt("--epsilon", &RunConfig::epsilon, "skeleton step epsilon");
    optional("-k", &RunConfig::k, "resolution: epsilon = 2^-k");
    opt("-d,--dim", &RunConfig::d, "Brownian dimension");
    opt("-T,--horizon", &RunConfig::T, "time horizon");
    opt("--kind", &RunConfig::kind, "euler | clock_index");
    opt("--coefficients", &RunConfig::coefficients, "zero | random_walk | geometric | pathdep_vol");
    params("--coef-param", &RunConfig::coefficient_params, "coefficient parameter key=value");
    opt("--payoff", &RunConfig::payoff, "constant | put | bounded_put | running_max | identity");
    params("--payoff-param", &RunConfig::payoff_params, "payoff parameter key=value");
    opt("-N,--paths", &RunConfig::paths, "simulated paths");
    opt("--fresh-paths", &RunConfig::fresh_paths, "paths for the lower-bound estimate");
    opt("--degree-policy", &RunConfig::degree_policy, "schedule | fixed");
    opt("--degree", &RunConfig::degree, "polynomial degree when fixed");
    opt("--bound-policy", &RunConfig::bound_policy, "payoff | constant | twice_target");
    opt("--bound", &RunConfig::bound, "truncation level for the constant policy");
    opt("--payoff-bound", &RunConfig::payoff_bound, "declared payoff bound L");
    optional("--truncate", &RunConfig::truncation, "truncate payoffs at this level");
    opt("--features", &RunConfig::features, "full | state_clock");
    opt("--state-ref", &RunConfig::state_ref, "reference state for state_clock features");
    flag("--with-oracle,!--no-oracle", &RunConfig::with_oracle, "also run the oracle");
    opt("--nodes", &RunConfig::nodes, "oracle nodes per layer");
    flag("--refine,!--no-refine", &RunConfig::refine, "oracle refinement check");
    opt("--e1", &RunConfig::e1, "plan: target error");
    opt("--beta", &RunConfig::beta, "plan: convergence exponent");
    opt("--phi", &RunConfig::phi, "plan: geometric | algebraic");
    opt("--phi-base", &RunConfig::phi_base, "plan: geometric base");
    opt("--phi-power", &RunConfig::phi_power, "plan: algebraic power");
    opt("--rounding", &RunConfig::rounding, "plan: printed | exact");
    auto sweep_paths = std::make_shared<Override<std::vector<std::size_t>>>();
    CLI::Option* sp = app.add_option("--sweep-paths", sweep_paths->value, "converge: path counts")->delimiter(',');
    overrides.push_back([sp, sweep_paths](RunConfig& c) {
        if (sp->count() > 0) c.sweep_paths = sweep_paths->value;
    });
    auto sweep_eps = std::make_shared<Override<std::vector<double>>>();
    CLI::Option* se = app.add_option("--sweep-epsilons", sweep_eps->value, "converge: epsilons")->delimiter(',');
    overrides.push_back([se, sweep_eps](RunConfig& c) {
        if (se->count() > 0) c.sweep_epsilons = sweep_eps->value;
    });
    opt("--replications", &RunConfig::replications, "converge: seeds per setting");
    opt("--spot", &RunConfig::spot, "bench: spot");
    opt("--strike", &RunConfig::strike, "bench: strike");
    opt("--rate", &RunConfig::rate, "bench: interest rate");
    opt("--volatility", &RunConfig::volatility, "bench: volatility");
    opt("--tree-steps", &RunConfig::tree_steps, "bench: binomial steps");
    opt("-s,--seed", &RunConfig::seed, "master seed");
    opt("-o,--output-dir", &RunConfig::output_dir, "directory for runs.jsonl and results.csv");
    opt("--format", &RunConfig::format, "table | csv | json");
    flag("--force", &RunConfig::force, "truncate existing output files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        result.help = true;
        result.help_text = app.help();
        return result;
    } catch (const CLI::CallForVersion&) {
        result.help = true;
        result.help_text = std::string(kVersion) + "\n";
        return result;
    } catch (const CLI::ParseError& e) {
        throw ConfigError(std::string("command line: ") + e.what());
    }

    RunConfig c = config_path.empty() ? RunConfig{} : load_config(config_path);
    for (const auto& apply : overrides) apply(c);
    if (app.get_subcommands().empty()) throw ConfigError("command line: a subcommand is required");
    c.command = app.get_subcommands().front()->get_name();
    if (app.get_option("--epsilon")->count() > 0 && app.get_option("-k")->count() == 0) c.k.reset();
    if (c.k) c.epsilon = std::exp2(-*c.k);
    c.validate();
    result.config = std::move(c);
    return result;
}

std::shared_ptr<const RewardStructure> make_structure(const RunConfig& c) {
    if (c.kind == "clock_index") {
        auto index = [](History h, double) { return static_cast<double>(h.size()); };
        return std::make_shared<HistoryStructure>("clock_index", index, c.epsilon, c.d, c.T);
    }
    if (c.d != 1) throw ConfigError("d: the euler structure is one-dimensional");
    return std::make_shared<EulerStructure>(make_coefficients(c.coefficients, c.coefficient_params),
                                            make_payoff(c.payoff, c.payoff_params), c.epsilon, c.T);
}

LsConfig make_ls_config(const RunConfig& c) {
    LsConfig ls;
    ls.skeleton = SkeletonConfig{c.epsilon, c.d, c.T, c.seed};
    ls.structure = make_structure(c);
    ls.paths = c.paths;
    ls.fresh_paths = c.fresh_paths;
    ls.degree_policy = c.degree_policy == "fixed" ? DegreePolicy::fixed : DegreePolicy::schedule;
    ls.degree = c.degree;
    ls.bound_policy = c.bound_policy == "constant"       ? BoundPolicy::constant
                      : c.bound_policy == "twice_target" ? BoundPolicy::twice_target
                                                         : BoundPolicy::payoff;
    ls.bound = c.bound;
    ls.payoff_bound = c.payoff_bound;
    ls.truncation = c.truncation;
    if (c.features == "state_clock") ls.compression = state_clock_hook(c.state_ref);
    ls.validate();
    return ls;
}

json run(const RunConfig& config, std::ostream& out, int threads, bool write_files) {
    config.validate();
    set_thread_count(threads);
    const double t0 = now_ms();
    std::vector<Row> rows;
    json timings = json::object();
    json results;
    if (config.command == "solve") results = solve_command(config, rows, timings);
    else if (config.command == "oracle") results = oracle_command(config, rows);
    else if (config.command == "converge") results = converge_command(config, rows);
    else if (config.command == "plan") results = plan_command(config, rows);
    else if (config.command == "validate") results = validate_command(config, rows);
    else results = bench_command(config, rows, timings);
    timings["wall_ms"] = now_ms() - t0;

    json record = {{"version", kVersion},
                   {"command", config.command},
                   {"config", to_json(config)},
                   {"results", results},
                   {"execution", {{"threads", threads}, {"timings", timings}}}};
    if (config.format == "json") out << record.dump(2) << "\n";
    else print_rows(out, config.format, rows);
    if (config.command == "validate" && config.format == "table")
        for (const auto& ch : results["checks"])
            out << (ch["pass"].get<bool>() ? "PASS " : "FAIL ") << ch["name"].get<std::string>() << "  "
                << std::setprecision(12) << ch["value"].get<double>() << "\n";
    if (config.format == "table") {
        if (config.command == "plan")
            out << "k* = " << results["k_star"].get<double>() << ", e = " << results["periods"].get<std::size_t>()
                << "\n";
        if (config.command == "bench")
            out << "tree: american " << results["american_tree"].get<double>() << ", european "
                << results["european_tree"].get<double>() << "; relative error "
                << results["relative_error"].get<double>() << "\n";
    }
    if (write_files) append_files(config, record, rows);
    return record;
}

const char* version() noexcept { return kVersion; }

}  // namespace dtstop
