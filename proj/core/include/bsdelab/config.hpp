#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bsdelab/fixtures.hpp"
#include "bsdelab/sensitivity.hpp"

namespace bsdelab {

enum class Task { Solve, Sensitivity, Malliavin, Bmo, FullVerify };

std::string to_string(Task task);
Task parse_task(std::string_view name);

struct Tolerances {
    double se_multiple = 3.0;   // |estimate - reference| <= k SE
    double z_rel_l2 = 0.05;     // Z against its reference
    double slope_min = 0.6;
    double slope_max = 1.4;
    double exact_floor = 1e-12; // E_sup below this counts as converged
    double trace = 0.05;
    double route = 0.05;
};

struct ExperimentSpec {
    std::string name;
    std::string fixture;
    Task task = Task::Solve;
    std::size_t steps = 50;
    std::size_t paths = 10'000;
    std::uint64_t seed = 1;
    std::size_t basis_degree = 3;
    std::size_t picard_iters = 2;
    FixtureOverrides overrides;
    std::vector<double> h_list;
    std::vector<std::size_t> theta_list;
    std::vector<double> epsilons;
    FdScheme fd_scheme = FdScheme::Forward;
    double moment_p = 1.0;
    double r_cap = 10.0;
    Tolerances tolerances;
};

/// Parses a JSON experiment spec. Unknown keys and type mismatches raise ConfigError.
ExperimentSpec parse_spec(const std::string& json_text);

ExperimentSpec load_spec(const std::filesystem::path& path);

/// Seed from BSDELAB_SEED, if set. ConfigError when it is not an unsigned integer.
std::optional<std::uint64_t> seed_from_environment();

/// Checks task-specific fields and that the fixture resolves.
void validate_spec(const ExperimentSpec& spec, const FixtureRegistry& registry);

/// Canonical JSON with sorted keys and every default spelled out.
std::string canonical_json(const ExperimentSpec& spec);

/// FNV-1a (64 bit) of the canonical JSON, as 16 hex digits.
std::string spec_hash(const ExperimentSpec& spec);

}  // namespace bsdelab
