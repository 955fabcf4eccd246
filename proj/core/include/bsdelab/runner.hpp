#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bsdelab/config.hpp"
#include "bsdelab/fixtures.hpp"
#include "bsdelab/sensitivity.hpp"

namespace bsdelab {

struct TaskResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct RunManifest {
    std::string spec_hash;
    std::string code_version;
    std::uint64_t seed = 0;
    std::string started_at;   // UTC, ISO 8601
    std::string finished_at;
    std::vector<TaskResult> tasks;
    std::vector<std::string> files;  // relative to run_dir, manifest.json last
    std::filesystem::path run_dir;

    bool passed() const noexcept;
    std::string to_json() const;
};

std::string code_version();

/// Runs the spec's task and writes its outputs under output_root / spec_hash.
/// Every file is written atomically; manifest.json is written last.
RunManifest run(const ExperimentSpec& spec, const FixtureRegistry& registry,
                const std::filesystem::path& output_root);

struct ConvergenceTable {
    std::string csv;   // h,E_sup,E_L2,slope_cum
    std::string plot;  // log10|h| log10(E_sup), whitespace separated
};

/// Rows of all reports in order. slope_cum is the rooted log-log slope over the
/// rows so far and is empty for the first row. Throws EmptyInput when there are
/// no rows or a cell is not finite.
ConvergenceTable emit_convergence_table(const std::vector<SensitivityReport>& reports);

}  // namespace bsdelab
