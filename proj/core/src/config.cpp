#include "bsdelab/config.hpp"

#include <charconv>
#include <cstdlib>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "bsdelab/csv.hpp"
#include "bsdelab/error.hpp"

namespace bsdelab {
namespace {

using nlohmann::json;

void reject_unknown(const json& object, const std::set<std::string>& allowed,
                    const std::string& where) {
    if (!object.is_object()) fail(ErrorCode::ConfigError, where + " must be a JSON object");
    for (const auto& [key, value] : object.items()) {
        if (!allowed.contains(key)) fail(ErrorCode::ConfigError, "unknown key '" + key + "' in " + where);
    }
}

template <typename T>
T read(const json& object, const std::string& key, const std::string& where) {
    try {
        return object.at(key).get<T>();
    } catch (const json::exception& e) {
        fail(ErrorCode::ConfigError, where + "." + key + ": " + e.what());
    }
}

template <typename T>
void read_optional(const json& object, const std::string& key, const std::string& where, T& out) {
    if (object.contains(key)) out = read<T>(object, key, where);
}

std::size_t read_count(const json& object, const std::string& key, const std::string& where,
                       std::size_t fallback) {
    if (!object.contains(key)) return fallback;
    const auto& v = object.at(key);
    if (!v.is_number_unsigned()) {
        fail(ErrorCode::ConfigError, where + "." + key + " must be a non-negative integer");
    }
    return v.get<std::size_t>();
}

}  // namespace

std::string to_string(Task task) {
    switch (task) {
        case Task::Solve: return "solve";
        case Task::Sensitivity: return "sensitivity";
        case Task::Malliavin: return "malliavin";
        case Task::Bmo: return "bmo";
        case Task::FullVerify: return "full-verify";
    }
    return "solve";
}

Task parse_task(std::string_view name) {
    for (Task t : {Task::Solve, Task::Sensitivity, Task::Malliavin, Task::Bmo, Task::FullVerify}) {
        if (to_string(t) == name) return t;
    }
    fail(ErrorCode::ConfigError, "unknown task '" + std::string(name) + "'");
}

ExperimentSpec parse_spec(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::ConfigError, std::string("malformed JSON: ") + e.what());
    }
    reject_unknown(root,
                   {"name", "fixture", "task", "grid", "paths", "seed", "basis_degree",
                    "picard_iters", "alpha", "initial_point", "truncation", "h_list",
                    "theta_list", "epsilons", "fd_scheme", "moment_p", "r_cap", "tolerances"},
                   "spec");
    ExperimentSpec spec;
    spec.name = read<std::string>(root, "name", "spec");
    spec.fixture = read<std::string>(root, "fixture", "spec");
    spec.task = parse_task(read<std::string>(root, "task", "spec"));
    if (root.contains("grid")) {
        const auto& grid = root.at("grid");
        reject_unknown(grid, {"steps", "horizon"}, "grid");
        spec.steps = read_count(grid, "steps", "grid", spec.steps);
        if (grid.contains("horizon")) spec.overrides.horizon = read<double>(grid, "horizon", "grid");
    }
    spec.paths = read_count(root, "paths", "spec", spec.paths);
    spec.seed = read_count(root, "seed", "spec", spec.seed);
    spec.basis_degree = read_count(root, "basis_degree", "spec", spec.basis_degree);
    spec.picard_iters = read_count(root, "picard_iters", "spec", spec.picard_iters);
    if (root.contains("alpha")) spec.overrides.alpha = read<double>(root, "alpha", "spec");
    if (root.contains("initial_point")) {
        spec.overrides.initial_point = read<std::vector<double>>(root, "initial_point", "spec");
    }
    if (root.contains("truncation")) spec.overrides.truncation = read<double>(root, "truncation", "spec");
    read_optional(root, "h_list", "spec", spec.h_list);
    read_optional(root, "theta_list", "spec", spec.theta_list);
    read_optional(root, "epsilons", "spec", spec.epsilons);
    if (root.contains("fd_scheme")) {
        const auto scheme = read<std::string>(root, "fd_scheme", "spec");
        if (scheme == "forward") {
            spec.fd_scheme = FdScheme::Forward;
        } else if (scheme == "central") {
            spec.fd_scheme = FdScheme::Central;
        } else {
            fail(ErrorCode::ConfigError, "fd_scheme must be 'forward' or 'central'");
        }
    }
    read_optional(root, "moment_p", "spec", spec.moment_p);
    read_optional(root, "r_cap", "spec", spec.r_cap);
    if (root.contains("tolerances")) {
        const auto& tol = root.at("tolerances");
        reject_unknown(tol,
                       {"se_multiple", "z_rel_l2", "slope_min", "slope_max", "exact_floor", "trace",
                        "route"},
                       "tolerances");
        auto& t = spec.tolerances;
        read_optional(tol, "se_multiple", "tolerances", t.se_multiple);
        read_optional(tol, "z_rel_l2", "tolerances", t.z_rel_l2);
        read_optional(tol, "slope_min", "tolerances", t.slope_min);
        read_optional(tol, "slope_max", "tolerances", t.slope_max);
        read_optional(tol, "exact_floor", "tolerances", t.exact_floor);
        read_optional(tol, "trace", "tolerances", t.trace);
        read_optional(tol, "route", "tolerances", t.route);
    }
    return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
    return parse_spec(read_file(path));
}

std::optional<std::uint64_t> seed_from_environment() {
    const char* raw = std::getenv("BSDELAB_SEED");
    if (raw == nullptr || *raw == '\0') return std::nullopt;
    const std::string_view text(raw);
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        fail(ErrorCode::ConfigError, "BSDELAB_SEED must be an unsigned integer, got '" +
                                         std::string(text) + "'");
    }
    return value;
}

void validate_spec(const ExperimentSpec& spec, const FixtureRegistry& registry) {
    require(!spec.name.empty(), ErrorCode::ConfigError, "spec name must not be empty");
    if (spec.task != Task::FullVerify) {
        if (!registry.contains(spec.fixture)) {
            fail(ErrorCode::UnknownFixture, "unknown fixture '" + spec.fixture + "'");
        }
        // Builds the fixture so unsupported overrides surface here.
        (void)registry.make(spec.fixture, spec.overrides);
    } else if (!spec.fixture.empty() && !registry.contains(spec.fixture)) {
        fail(ErrorCode::UnknownFixture, "unknown fixture '" + spec.fixture + "'");
    }
    require(spec.steps >= 2, ErrorCode::ConfigError, "grid.steps must be >= 2");
    require(spec.paths >= 100, ErrorCode::ConfigError, "paths must be >= 100");
    require(spec.picard_iters >= 1, ErrorCode::ConfigError, "picard_iters must be >= 1");
    switch (spec.task) {
        case Task::Sensitivity:
            require(spec.h_list.size() >= 3, ErrorCode::ConfigError,
                    "sensitivity task needs h_list with at least three steps");
            break;
        case Task::Malliavin:
            require(!spec.theta_list.empty(), ErrorCode::ConfigError,
                    "malliavin task needs a non-empty theta_list");
            for (auto theta : spec.theta_list) {
                require(theta < spec.steps, ErrorCode::ConfigError,
                        "theta_list entries must be grid nodes before the horizon");
            }
            break;
        case Task::Bmo:
            require(spec.r_cap > 1.0, ErrorCode::ConfigError, "r_cap must exceed 1");
            require(spec.moment_p >= 1.0, ErrorCode::ConfigError, "moment_p must be >= 1");
            break;
        case Task::Solve:
        case Task::FullVerify:
            break;
    }
}

std::string canonical_json(const ExperimentSpec& spec) {
    json root;  // std::map-backed, so keys come out sorted
    root["name"] = spec.name;
    root["fixture"] = spec.fixture;
    root["task"] = to_string(spec.task);
    root["grid"] = {{"steps", spec.steps}};
    if (spec.overrides.horizon) root["grid"]["horizon"] = *spec.overrides.horizon;
    root["paths"] = spec.paths;
    root["seed"] = spec.seed;
    root["basis_degree"] = spec.basis_degree;
    root["picard_iters"] = spec.picard_iters;
    if (spec.overrides.alpha) root["alpha"] = *spec.overrides.alpha;
    if (spec.overrides.initial_point) root["initial_point"] = *spec.overrides.initial_point;
    if (spec.overrides.truncation) root["truncation"] = *spec.overrides.truncation;
    root["h_list"] = spec.h_list;
    root["theta_list"] = spec.theta_list;
    root["epsilons"] = spec.epsilons;
    root["fd_scheme"] = spec.fd_scheme == FdScheme::Forward ? "forward" : "central";
    root["moment_p"] = spec.moment_p;
    root["r_cap"] = spec.r_cap;
    const auto& t = spec.tolerances;
    root["tolerances"] = {{"se_multiple", t.se_multiple}, {"z_rel_l2", t.z_rel_l2},
                          {"slope_min", t.slope_min},     {"slope_max", t.slope_max},
                          {"exact_floor", t.exact_floor}, {"trace", t.trace},
                          {"route", t.route}};
    return root.dump();
}

std::string spec_hash(const ExperimentSpec& spec) {
    const std::string text = canonical_json(spec);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

}  // namespace bsdelab
