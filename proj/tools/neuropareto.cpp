#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "np/cli.hpp"

namespace {

np::cli::RunConfig load(const std::string& config_path, const std::string& seeds_csv)
{
    auto cfg = np::cli::parse_config(config_path);
    if (!seeds_csv.empty()) {
        cfg.seeds.clear();
        std::stringstream ss(seeds_csv);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) cfg.seeds.push_back(std::stoull(tok));
        if (cfg.seeds.empty()) throw std::invalid_argument("--seeds produced an empty list");
    }
    return cfg;
}

int finish(const np::cli::CommandResult& res)
{
    if (!res.message.empty()) std::cout << res.message << "\n";
    return res.exit_code;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"NeuroPareto surrogate-assisted multi-objective optimizer"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", seeds_csv;
    bool force = false;
    std::vector<std::string> compare_modes = {"neuropareto", "random", "static"};

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "config file (JSON)")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seeds", seeds_csv, "comma-separated seed list (overrides config)");
        sub->add_flag("--force", force, "overwrite existing outputs");
    };

    auto* run = app.add_subcommand("run", "optimize with the mode set in the config");
    add_common(run);
    auto* ablate = app.add_subcommand("ablate", "run with the config's ablation flags");
    add_common(ablate);
    auto* compare = app.add_subcommand("compare", "run several modes on shared seeds");
    add_common(compare);
    compare->add_option("--modes", compare_modes, "modes to compare");
    auto* calibrate = app.add_subcommand("calibrate", "classifier calibration report");
    add_common(calibrate);
    auto* constants = app.add_subcommand("constants", "estimate L_H, H_max and rho");
    add_common(constants);

    CLI11_PARSE(app, argc, argv);

    try {
        auto cfg = load(config_path, seeds_csv);
        if (run->parsed()) return finish(np::cli::cmd_run(cfg, out_dir, force));
        if (ablate->parsed()) {
            cfg.mode = "ablation";
            return finish(np::cli::cmd_run(cfg, out_dir, force));
        }
        if (compare->parsed())
            return finish(np::cli::cmd_compare(cfg, compare_modes, out_dir, force));
        if (calibrate->parsed()) return finish(np::cli::cmd_calibrate(cfg, out_dir, force));
        if (constants->parsed()) return finish(np::cli::cmd_constants(cfg, out_dir, force));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
