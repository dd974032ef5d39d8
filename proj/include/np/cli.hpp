#ifndef NP_CLI_HPP
#define NP_CLI_HPP

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "np/bench.hpp"
#include "np/loop.hpp"

namespace np::cli {

struct RunConfig {
    std::string problem_name = "dtlz2";
    std::size_t dim = 30;
    std::size_t n_obj = 2;
    loop::LoopConfig loop;
    std::vector<std::uint64_t> seeds = {1};
    std::string mode = "neuropareto";  // neuropareto | random | static | ablation
    std::set<loop::Ablation> ablation;
    std::size_t hv_mc_samples = 100000;

    bench::ProblemSpec problem() const;
};

// strict parse: unknown keys and contradictory fields are rejected with a
// message naming the offender; all defaults filled in
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_json(const std::string& text);
std::string effective_config_json(const RunConfig& cfg);

loop::RunResult execute(const RunConfig& cfg, const std::string& mode, std::uint64_t seed);

std::string run_table_csv(const std::vector<loop::IterationRow>& rows);
std::vector<loop::IterationRow> parse_run_table_csv(const std::string& text);

// exact two-sided Wilcoxon signed-rank test by sign enumeration (n <= 12
// pairs after dropping zero differences; p = 1 when everything ties)
double wilcoxon_signed_rank_exact(const std::vector<double>& a, const std::vector<double>& b);

struct CommandResult {
    int exit_code = 0;
    std::string message;
};

CommandResult cmd_run(const RunConfig& cfg, const std::filesystem::path& out_dir, bool force);
CommandResult cmd_compare(const RunConfig& cfg, const std::vector<std::string>& modes,
                          const std::filesystem::path& out_dir, bool force);
CommandResult cmd_calibrate(const RunConfig& cfg, const std::filesystem::path& out_dir,
                            bool force);
CommandResult cmd_constants(const RunConfig& cfg, const std::filesystem::path& out_dir,
                            bool force);

} // namespace np::cli

#endif
