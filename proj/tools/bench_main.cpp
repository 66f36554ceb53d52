#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "descent/descent.hpp"
#include "verify_suite.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_run(const std::string& config_path, const std::string& out_dir, bool seed_given,
            std::uint64_t seed) {
    descent::Config cfg = descent::Config::parse_file(config_path);
    if (seed_given) cfg.set("run.seed", std::to_string(seed));
    descent::ExperimentSpec spec = descent::spec_from_config(cfg);
    const std::vector<descent::MetricsRow> rows = descent::run(spec);

    fs::create_directories(out_dir);
    const fs::path csv_path = fs::path(out_dir) / "metrics.csv";
    {
        std::ofstream out(csv_path, std::ios::binary);
        if (!out) throw descent::Error("io", "cannot write " + csv_path.string());
        descent::write_csv(out, rows);
        if (!out) throw descent::Error("io", "short write to " + csv_path.string());
    }
    const auto plots = descent::emit_plots(rows, out_dir);

    std::cout << descent::summary_table(rows);
    std::cout << "wrote " << csv_path.string();
    for (const auto& p : plots) std::cout << " " << p;
    std::cout << "\n";
    return 0;
}

int cmd_plot(const std::string& csv_path, const std::string& out_dir) {
    std::ifstream in(csv_path, std::ios::binary);
    if (!in) throw descent::Error("io", "cannot read " + csv_path);
    const std::vector<descent::MetricsRow> rows = descent::read_csv(in);
    fs::create_directories(out_dir);
    const auto plots = descent::emit_plots(rows, out_dir);
    std::cout << "wrote";
    for (const auto& p : plots) std::cout << " " << p;
    std::cout << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"gradient-descent benchmark harness"};
    app.require_subcommand(1);

    std::string config_path, csv_path;
    std::string run_out = "bench_out", plot_out = "bench_out";
    std::uint64_t seed = 0;

    CLI::App* run_cmd = app.add_subcommand("run", "train the configured optimizer lineup");
    run_cmd->add_option("--config", config_path, "experiment config file")->required();
    run_cmd->add_option("--out", run_out, "output directory for metrics.csv and plots");
    CLI::Option* seed_opt = run_cmd->add_option("--seed", seed, "override run.seed");

    CLI::App* plot_cmd = app.add_subcommand("plot", "render charts from a metrics csv");
    plot_cmd->add_option("--csv", csv_path, "metrics csv produced by run")->required();
    plot_cmd->add_option("--out", plot_out, "output directory")->required();

    app.add_subcommand("verify", "run the property suites");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) return cmd_run(config_path, run_out, seed_opt->count() > 0, seed);
        if (plot_cmd->parsed()) return cmd_plot(csv_path, plot_out);
        const int failures = verify::run_all(std::cout);
        if (failures > 0) {
            std::cerr << "error [verify]: " << failures << " checks failed\n";
            return 1;
        }
        return 0;
    } catch (const descent::Error& e) {
        std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
