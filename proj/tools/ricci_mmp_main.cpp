#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "ricci_mmp/scenario.hpp"

namespace {

// Suites resolve bundled scenario files against, in order: RICCI_MMP_SCENARIOS,
// a scenarios/ directory under the current directory, the directory of the
// scenario file itself (set by the runner for file-based invocations).
std::string default_scenario_dir() {
    if (const char* env = std::getenv("RICCI_MMP_SCENARIOS")) return env;
    if (std::filesystem::is_directory("scenarios")) return "scenarios";
    return "";
}

int run_target(const std::string& target, ricci_mmp::RunOptions opt) {
    if (ricci_mmp::is_suite_name(target)) {
        if (opt.scenario_dir.empty()) opt.scenario_dir = default_scenario_dir();
        return ricci_mmp::run_suite_by_name(target, opt);
    }
    return ricci_mmp::run_scenario_file(target, opt);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Discrete Ricci flow laboratory: toric MMP with scaling, torus potential "
                 "flows, and the axisymmetric sphere flow"};
    app.require_subcommand(1);

    std::string target, out_dir = ".";
    int jobs = 1;

    CLI::App* run = app.add_subcommand("run", "Run a scenario file or a named suite");
    run->add_option("scenario", target, "Scenario JSON file, or a suite name from `suites`")
        ->required();
    run->add_option("--out", out_dir, "Directory for result artifacts (default: current)");
    run->add_option("--jobs", jobs, "Parallel width for independent sweep members");

    CLI::App* suites = app.add_subcommand("suites", "List the named acceptance suites");

    std::string validate_path;
    CLI::App* validate = app.add_subcommand("validate", "Check a scenario file without running it");
    validate->add_option("scenario", validate_path, "Scenario JSON file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (suites->parsed()) {
            std::cout << ricci_mmp::render_suites_table();
            return 0;
        }
        if (validate->parsed()) return ricci_mmp::validate_scenario_file(validate_path);
        ricci_mmp::RunOptions opt;
        opt.out_dir = out_dir;
        opt.jobs = jobs;
        return run_target(target, opt);
    } catch (const ricci_mmp::SchemaError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "engine error: " << e.what() << "\n";
        return 1;
    }
}
