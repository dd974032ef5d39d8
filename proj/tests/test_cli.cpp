#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "np/cli.hpp"
#include "oracles.hpp"

using namespace np;
using namespace np::cli;
namespace fs = std::filesystem;

namespace {

const char* kFastConfig = R"({
  "problem": {"name": "dtlz2", "D": 6, "M": 2},
  "budget": 32,
  "batch_q": 4,
  "pool_size": 100,
  "n_screen": 50,
  "top_k": 10,
  "init_size": 16,
  "ref_front_size": 200,
  "seeds": [1, 2],
  "classifier": {"h1": 32, "h2": 32, "epochs": 15},
  "surrogate": {"m_ind": 8, "d_rff": 32, "warm_epochs": 4, "full_epochs": 10},
  "acquisition": {"steps": 20}
})";

struct TempDir {
    fs::path path;
    TempDir(const std::string& name) : path(fs::temp_directory_path() / name)
    {
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p)
{
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("minimal config gets defaults, invalid configs are rejected by name")
{
    auto cfg = parse_config_json(
        R"({"problem": {"name": "dtlz2", "D": 10, "M": 2}, "budget": 150, "seed": 1})");
    CHECK(cfg.loop.budget == 150);
    CHECK(cfg.loop.batch_q == 5);
    CHECK(cfg.loop.pool_size == 1000);
    CHECK(cfg.loop.n_screen == 500);
    CHECK(cfg.loop.top_k == 50);
    CHECK(cfg.loop.n_ranks == 5);
    CHECK(cfg.loop.effective_init(10) == 100);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{1});
    CHECK(cfg.mode == "neuropareto");

    CHECK_THROWS_WITH_AS(parse_config_json(
        R"({"problem": {"name": "dtlz2", "D": 10, "M": 2}, "budget": 150, "seed": 1, "batch_q": 80})"),
        "config: q exceeds k (q=80, k=50)", std::invalid_argument);

    CHECK_THROWS_WITH_AS(parse_config_json(
        R"({"problem": {"name": "dtlz2", "D": 10, "M": 2}, "budget": 150, "seed": 1, "bogus": 3})"),
        "config: unknown key 'bogus'", std::invalid_argument);

    CHECK_THROWS_WITH_AS(parse_config_json(
        R"({"problem": {"name": "dtlz2", "D": 10, "M": 2, "extra": 1}, "budget": 150, "seed": 1})"),
        "config: unknown key 'problem.extra'", std::invalid_argument);

    CHECK_THROWS_AS(parse_config_json(
        R"({"problem": {"name": "zdt1", "D": 10, "M": 3}, "budget": 150, "seed": 1})"),
        std::invalid_argument);
}

TEST_CASE("effective config echo round-trips to the same effective config")
{
    auto cfg = parse_config_json(kFastConfig);
    std::string echo = effective_config_json(cfg);
    auto cfg2 = parse_config_json(echo);
    CHECK(effective_config_json(cfg2) == echo);
    CHECK(cfg2.seeds == cfg.seeds);
    CHECK(cfg2.loop.budget == cfg.loop.budget);
    CHECK(cfg2.loop.surrogate.m_inducing == cfg.loop.surrogate.m_inducing);
}

TEST_CASE("run table CSV round-trips exactly")
{
    std::vector<loop::IterationRow> rows(3);
    Rng rng(3);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].iteration = i;
        rows[i].evals = 16 + 4 * i;
        rows[i].hv = rng.uniform() * 3.1234567890123;
        rows[i].igd = rng.uniform();
        rows[i].mean_s_used = 4.0 + rng.uniform();
        rows[i].refit = i == 0 ? "none" : (i == 1 ? "full" : "warm");
        rows[i].epochs = rng.below(50);
        rows[i].acq_loss = rng.uniform();
        rows[i].seconds = rng.uniform();
    }
    std::string csv = run_table_csv(rows);
    CHECK(csv.substr(0, csv.find('\n')) ==
          "iteration,evals,hv,igd,mean_s_used,refit,epochs,acq_loss,seconds");
    auto parsed = parse_run_table_csv(csv);
    REQUIRE(parsed.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(parsed[i].iteration == rows[i].iteration);
        CHECK(parsed[i].evals == rows[i].evals);
        CHECK(parsed[i].hv == rows[i].hv);
        CHECK(parsed[i].igd == rows[i].igd);
        CHECK(parsed[i].mean_s_used == rows[i].mean_s_used);
        CHECK(parsed[i].refit == rows[i].refit);
        CHECK(parsed[i].epochs == rows[i].epochs);
        CHECK(parsed[i].acq_loss == rows[i].acq_loss);
        CHECK(parsed[i].seconds == rows[i].seconds);
    }
}

TEST_CASE("wilcoxon exact: no-effect and strict-dominance cases")
{
    std::vector<double> a = {1, 2, 3, 4, 5, 6};
    CHECK(wilcoxon_signed_rank_exact(a, a) == 1.0);

    std::vector<double> b = {0.5, 1.5, 2.5, 3.5, 4.5, 5.5};
    CHECK(wilcoxon_signed_rank_exact(a, b) == doctest::Approx(2.0 / 64.0));

    // symmetric mixed differences: p stays in (0, 1]
    std::vector<double> c = {2, 1, 4, 3, 6, 5};
    double p = wilcoxon_signed_rank_exact(a, c);
    CHECK(p > 0.0);
    CHECK(p <= 1.0);
    CHECK_THROWS_AS(wilcoxon_signed_rank_exact({1, 2}, {1}), std::invalid_argument);
}

TEST_CASE("cmd_run writes tables, dumps, summary; refuses overwrite without force")
{
    TempDir dir("np_cli_run_test");
    auto cfg = parse_config_json(kFastConfig);
    auto res = cmd_run(cfg, dir.path, false);
    CHECK(res.exit_code == 0);
    CHECK(fs::exists(dir.path / "effective_config.json"));
    CHECK(fs::exists(dir.path / "run_table_seed1.csv"));
    CHECK(fs::exists(dir.path / "run_table_seed2.csv"));
    CHECK(fs::exists(dir.path / "archive_seed1.json"));
    CHECK(fs::exists(dir.path / "history_seed2.json"));
    CHECK(fs::exists(dir.path / "summary.csv"));

    auto blocked = cmd_run(cfg, dir.path, false);
    CHECK(blocked.exit_code != 0);
    auto forced = cmd_run(cfg, dir.path, true);
    CHECK(forced.exit_code == 0);

    // summary median matches recomputation from the tables
    std::vector<double> finals;
    for (int s = 1; s <= 2; ++s) {
        auto rows = parse_run_table_csv(slurp(dir.path / ("run_table_seed" + std::to_string(s) + ".csv")));
        finals.push_back(rows.back().hv);
    }
    std::sort(finals.begin(), finals.end());
    double median = 0.5 * (finals[0] + finals[1]);
    std::string summary = slurp(dir.path / "summary.csv");
    auto pos = summary.find("final_hv,");
    REQUIRE(pos != std::string::npos);
    double reported = std::stod(summary.substr(pos + 9));
    CHECK(reported == doctest::Approx(median).epsilon(1e-12));
}

TEST_CASE("cmd_run is reproducible from its own effective config echo")
{
    TempDir d1("np_cli_echo_a"), d2("np_cli_echo_b");
    auto cfg = parse_config_json(kFastConfig);
    cfg.seeds = {7};
    CHECK(cmd_run(cfg, d1.path, false).exit_code == 0);
    auto cfg2 = parse_config_json(slurp(d1.path / "effective_config.json"));
    CHECK(cmd_run(cfg2, d2.path, false).exit_code == 0);

    // bit-identical modulo the wall-clock column
    auto r1 = parse_run_table_csv(slurp(d1.path / "run_table_seed7.csv"));
    auto r2 = parse_run_table_csv(slurp(d2.path / "run_table_seed7.csv"));
    REQUIRE(r1.size() == r2.size());
    for (std::size_t i = 0; i < r1.size(); ++i) {
        CHECK(r1[i].hv == r2[i].hv);
        CHECK(r1[i].igd == r2[i].igd);
        CHECK(r1[i].mean_s_used == r2[i].mean_s_used);
        CHECK(r1[i].acq_loss == r2[i].acq_loss);
    }
    CHECK(slurp(d1.path / "archive_seed7.json") == slurp(d2.path / "archive_seed7.json"));
    CHECK(slurp(d1.path / "history_seed7.json") == slurp(d2.path / "history_seed7.json"));
}

TEST_CASE("cmd_compare emits per-mode medians and exact p-values")
{
    TempDir dir("np_cli_compare_test");
    auto cfg = parse_config_json(kFastConfig);
    cfg.seeds = {1, 2, 3};
    auto res = cmd_compare(cfg, {"neuropareto", "random"}, dir.path, false);
    CHECK(res.exit_code == 0);
    std::string table = slurp(dir.path / "comparison.csv");
    CHECK(table.find("alpha,0.05") != std::string::npos);
    CHECK(table.find("neuropareto,") != std::string::npos);
    CHECK(table.find("random,") != std::string::npos);
    CHECK(table.find("neuropareto_vs_random,hv,") != std::string::npos);
    CHECK(table.find("neuropareto_vs_random,igd,") != std::string::npos);

    auto bad = cmd_compare(cfg, {"neuropareto"}, dir.path, true);
    CHECK(bad.exit_code != 0);
}

TEST_CASE("cmd_calibrate emits 15 reliability rows and never hurts NLL")
{
    TempDir dir("np_cli_calibrate_test");
    auto cfg = parse_config_json(kFastConfig);
    cfg.seeds = {1};
    cfg.loop.init_size = 60;
    cfg.loop.budget = 100;
    cfg.loop.clf_epochs = 40;
    auto res = cmd_calibrate(cfg, dir.path, false);
    CHECK(res.exit_code == 0);
    std::string rel = slurp(dir.path / "reliability_seed1.csv");
    std::size_t lines = std::count(rel.begin(), rel.end(), '\n');
    CHECK(lines == 16);  // header + 15 bins

    // nll_post <= nll_pre on the calibration split (last two columns)
    std::string report = slurp(dir.path / "calibration.csv");
    std::istringstream is(report);
    std::string line;
    std::getline(is, line);
    std::getline(is, line);
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    REQUIRE(fields.size() == 10);
    CHECK(std::stod(fields[9]) <= std::stod(fields[8]) + 1e-12);

    // reproducible per seed
    TempDir dir2("np_cli_calibrate_test2");
    auto res2 = cmd_calibrate(cfg, dir2.path, false);
    CHECK(slurp(dir2.path / "calibration.csv") == report);
}

TEST_CASE("cmd_constants produces finite nonnegative estimates and refuses large D")
{
    TempDir dir("np_cli_constants_test");
    auto cfg = parse_config_json(kFastConfig);
    cfg.seeds = {3};
    auto res = cmd_constants(cfg, dir.path, false);
    CHECK(res.exit_code == 0);
    std::string table = slurp(dir.path / "constants.csv");
    CHECK(table.find("L_H,") != std::string::npos);
    CHECK(table.find("H_max,") != std::string::npos);
    CHECK(table.find("rho,") != std::string::npos);
    CHECK(table.find("N=500 delta=0.01") != std::string::npos);

    auto big = parse_config_json(
        R"({"problem": {"name": "dtlz2", "D": 30, "M": 2}, "budget": 150, "seed": 1})");
    TempDir dir2("np_cli_constants_test2");
    auto refused = cmd_constants(big, dir2.path, false);
    CHECK(refused.exit_code != 0);
}
