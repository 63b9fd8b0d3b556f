#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tabdc/errors.hpp"
#include "tabdc/pipeline.hpp"

namespace {

int thread_count_from_env() {
    const char* env = std::getenv("TABDC_THREADS");
    if (!env) return 1;
    const int n = std::atoi(env);
    return n >= 1 ? n : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Condenses tabular clinical data into a small synthetic surrogate by zero-order "
                 "optimization against a black-box reference model, with differential privacy "
                 "accounting, utility evaluation, and inference-attack auditing."};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    std::vector<int> ipc_list;
    bool force = false;
    std::uint64_t seed_override = 0;
    bool seed_given = false;

    const std::vector<std::string> commands{"prepare", "train-ref", "condense", "eval",
                                            "attack",  "budget",    "report"};
    const std::vector<std::string> descriptions{
        "load or generate data, split, standardize, write prepared CSVs",
        "train the black-box reference model on the prepared training split",
        "optimize the synthetic dataset against the reference model",
        "train a downstream model on the condensed data and measure test utility",
        "run membership / attribute inference attacks on the condensed data",
        "replay a run's privacy ledger and print the epsilon-versus-steps curve",
        "collate utility, privacy and attack artifacts into one summary table"};
    for (std::size_t k = 0; k < commands.size(); ++k) {
        auto* sub = app.add_subcommand(commands[k], descriptions[k]);
        sub->add_option("--config", config_path, "path to the run configuration (JSON)")
            ->required();
        sub->add_flag("--force", force, "rerun even when artifacts are up to date");
        sub->add_option("--seed", seed_override, "override the configured seed")
            ->each([&](const std::string&) { seed_given = true; });
        sub->add_option("--ipc", ipc_list,
                        "synthetic instances per class (repeatable for sweeps)");
        sub->add_option("--out", out_override, "override the configured output directory");
    }

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        nlohmann::json raw;
        try {
            raw = tabdc::pipeline::read_json(config_path);
        } catch (const std::exception& e) {
            throw tabdc::ConfigError(std::string("config: ") + e.what());
        }
        if (seed_given) raw["seed"] = seed_override;
        auto cfg = tabdc::pipeline::validate_config(raw);
        if (!out_override.empty()) cfg.out_dir = out_override;
        if (cfg.out_dir.empty())
            throw tabdc::ConfigError("config: out_dir missing (set it in the config or via --out)");

        tabdc::pipeline::StageOptions opt;
        opt.force = force;
        opt.ipc_list = ipc_list;
        opt.threads = thread_count_from_env();
        return tabdc::pipeline::run_command(command, cfg, opt);
    } catch (const tabdc::ConfigError& e) {
        std::cerr << "{\"error\":\"validation\",\"message\":\"" << e.what() << "\"}\n";
        return 2;
    } catch (const tabdc::DependencyError& e) {
        std::cerr << "{\"error\":\"dependency\",\"message\":\"" << e.what() << "\"}\n";
        return 3;
    } catch (const tabdc::NumericalError& e) {
        std::cerr << "{\"error\":\"numerical\",\"message\":\"" << e.what() << "\"}\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "{\"error\":\"internal\",\"message\":\"" << e.what() << "\"}\n";
        return 1;
    }
}
