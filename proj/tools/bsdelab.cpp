#include <CLI11.hpp>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "bsdelab/config.hpp"
#include "bsdelab/error.hpp"
#include "bsdelab/fixtures.hpp"
#include "bsdelab/runner.hpp"
#include "bsdelab/verify.hpp"

namespace {

// Exit codes: 0 all PASS, 1 tolerance FAIL, 2 runtime error.
constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kError = 2;

int report(const bsdelab::RunManifest& manifest) {
    for (const auto& task : manifest.tasks) {
        std::cout << (task.pass ? "PASS " : "FAIL ") << task.name << "  " << task.detail << '\n';
    }
    std::cout << "outputs: " << manifest.run_dir.string() << '\n';
    return manifest.passed() ? kPass : kFail;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bsdelab: quadratic BSDE solver, sensitivities and Malliavin diagnostics"};
    app.require_subcommand(1);
    std::filesystem::path output_root = "runs";
    app.add_option("-o,--output", output_root, "Root directory for per-run outputs");

    auto* run_cmd = app.add_subcommand("run", "Run an experiment described by a JSON config");
    std::filesystem::path config_path;
    run_cmd->add_option("config", config_path, "Experiment config file")->required();

    app.add_subcommand("fixtures", "List the compiled-in fixtures");

    auto* verify_cmd = app.add_subcommand("verify", "Run the acceptance criteria");
    std::optional<std::string> fixture;
    std::optional<std::uint64_t> seed;
    verify_cmd->add_option("--fixture", fixture, "Restrict fixture-bound criteria to one fixture");
    verify_cmd->add_option("--seed", seed, "Random seed (overrides BSDELAB_SEED)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints help or the usage error
        return code == 0 ? kPass : kError;
    }

    try {
        const bsdelab::FixtureRegistry registry;
        if (app.got_subcommand("fixtures")) {
            std::cout << bsdelab::list_fixtures(registry);
            return kPass;
        }
        if (run_cmd->parsed()) {
            bsdelab::ExperimentSpec spec = bsdelab::load_spec(config_path);
            if (auto env = bsdelab::seed_from_environment()) spec.seed = *env;
            return report(bsdelab::run(spec, registry, output_root));
        }
        bsdelab::ExperimentSpec spec;
        spec.name = "verify";
        spec.task = bsdelab::Task::FullVerify;
        spec.fixture = fixture.value_or("");
        spec.seed = 1;
        if (auto env = bsdelab::seed_from_environment()) spec.seed = *env;
        if (seed) spec.seed = *seed;
        const auto manifest = bsdelab::run(spec, registry, output_root);
        return report(manifest);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kError;
    }
}
