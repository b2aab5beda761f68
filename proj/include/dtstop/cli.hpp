#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtstop/errors.hpp"
#include "dtstop/solver.hpp"
#include "dtstop/structures.hpp"

namespace dtstop {

/// Configuration or command-line problem, with the location or field at fault.
class ConfigError : public Error {
public:
    using Error::Error;
};

struct RunConfig {
    std::string command = "solve";

    // skeleton
    double epsilon = 0.5;
    std::optional<double> k;  // epsilon = 2^-k when given
    int d = 1;
    double T = 1.0;

    // structure
    std::string kind = "euler";  // euler | clock_index
    std::string coefficients = "random_walk";
    Parameters coefficient_params;
    std::string payoff = "bounded_put";
    Parameters payoff_params;

    // solver
    std::size_t paths = 10000;
    std::size_t fresh_paths = 0;
    std::string degree_policy = "schedule";  // schedule | fixed
    int degree = 2;
    std::string bound_policy = "payoff";  // payoff | constant | twice_target
    double bound = 1.0;
    double payoff_bound = 1.0;
    std::optional<double> truncation;
    std::string features = "full";  // full | state_clock
    double state_ref = 1.0;
    bool with_oracle = false;

    // oracle
    int nodes = 32;
    bool refine = true;

    // planner
    double e1 = 0.45;
    double beta = 0.2;
    std::string phi = "geometric";  // geometric | algebraic
    double phi_base = 2.0;
    double phi_power = 1.0;
    std::string rounding = "printed";  // printed | exact

    // converge
    std::vector<std::size_t> sweep_paths;
    std::vector<double> sweep_epsilons;
    std::size_t replications = 1;

    // bench (American put)
    double spot = 100.0;
    double strike = 100.0;
    double rate = 0.06;
    double volatility = 0.2;
    int tree_steps = 10000;

    std::uint64_t seed = 1;

    // output
    std::string output_dir;  // empty: $DTSTOP_OUTPUT_DIR or ./dtstop-runs
    std::string format = "table";  // table | csv | json
    bool force = false;

    void validate() const;
    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Parses a JSON configuration. Unknown keys are rejected; parse errors carry
/// line and column, validation errors the field name.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);
nlohmann::json to_json(const RunConfig& config);

/// Parses argv (subcommand, optional --config file, then flags overriding file values).
/// Returns the config and the requested thread count.
struct CommandLine {
    RunConfig config;
    int threads = 1;
    bool help = false;
    std::string help_text;
};
CommandLine parse_command_line(int argc, const char* const* argv);

std::shared_ptr<const RewardStructure> make_structure(const RunConfig& config);
LsConfig make_ls_config(const RunConfig& config);

/// Executes the configured command. Tables go to out; the JSON run record and
/// CSV rows are appended to files in the output directory unless dry is set.
nlohmann::json run(const RunConfig& config, std::ostream& out, int threads = 1, bool write_files = true);

const char* version() noexcept;

}  // namespace dtstop
