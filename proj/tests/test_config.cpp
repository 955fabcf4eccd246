#include <gtest/gtest.h>

#include <cstdlib>

#include "bsdelab/config.hpp"
#include "bsdelab/error.hpp"

using namespace bsdelab;

namespace {

ErrorCode code_of(const std::function<void()>& body) {
    try {
        body();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorCode::IoError;
}

class SeedEnv {
public:
    explicit SeedEnv(const char* value) { setenv("BSDELAB_SEED", value, 1); }
    ~SeedEnv() { unsetenv("BSDELAB_SEED"); }
};

}  // namespace

TEST(Spec, ParsesAllFields) {
    const auto spec = parse_spec(R"({
        "name": "sens", "fixture": "tanh-quadratic", "task": "sensitivity",
        "grid": {"steps": 40, "horizon": 2.0}, "paths": 5000, "seed": 9,
        "basis_degree": 4, "picard_iters": 3, "alpha": 0.25, "initial_point": [0.1],
        "h_list": [0.1, 0.01, 0.001], "epsilons": [0.05, 0.1], "fd_scheme": "central",
        "tolerances": {"slope_min": 0.5}
    })");
    EXPECT_EQ(spec.task, Task::Sensitivity);
    EXPECT_EQ(spec.steps, 40u);
    EXPECT_EQ(*spec.overrides.horizon, 2.0);
    EXPECT_EQ(spec.paths, 5000u);
    EXPECT_EQ(spec.seed, 9u);
    EXPECT_EQ(*spec.overrides.alpha, 0.25);
    EXPECT_EQ(spec.h_list.size(), 3u);
    EXPECT_EQ(spec.fd_scheme, FdScheme::Central);
    EXPECT_EQ(spec.tolerances.slope_min, 0.5);
    EXPECT_EQ(spec.tolerances.slope_max, 1.4);
}

TEST(Spec, RejectsUnknownKeysAndBadValues) {
    const char* bad[] = {
        R"({"name": "a", "fixture": "cole-hopf-bm", "task": "solve", "pathz": 10})",
        R"({"name": "a", "fixture": "cole-hopf-bm", "task": "solve", "grid": {"stepz": 3}})",
        R"({"name": "a", "fixture": "cole-hopf-bm", "task": "solve", "tolerances": {"x": 1}})",
        R"({"name": "a", "fixture": "cole-hopf-bm", "task": "fly"})",
        R"({"name": "a", "fixture": "cole-hopf-bm", "task": "solve", "paths": -3})",
        R"({"name": "a", "fixture": "cole-hopf-bm", "task": "solve", "fd_scheme": "upwind"})",
        R"({"fixture": "cole-hopf-bm", "task": "solve"})",
        R"({"name": "a", "fixture": )",
    };
    for (const char* text : bad) EXPECT_EQ(code_of([&] { (void)parse_spec(text); }), ErrorCode::ConfigError) << text;
}

TEST(Spec, HashIgnoresKeyOrderAndTracksContent) {
    const auto a = parse_spec(R"({"name": "x", "fixture": "cole-hopf-bm", "task": "solve", "paths": 2000, "seed": 3})");
    const auto b = parse_spec(R"({"seed": 3, "paths": 2000, "task": "solve", "fixture": "cole-hopf-bm", "name": "x"})");
    const auto c = parse_spec(R"({"seed": 4, "paths": 2000, "task": "solve", "fixture": "cole-hopf-bm", "name": "x"})");
    EXPECT_EQ(spec_hash(a), spec_hash(b));
    EXPECT_NE(spec_hash(a), spec_hash(c));
    EXPECT_EQ(spec_hash(a).size(), 16u);
    EXPECT_EQ(canonical_json(a), canonical_json(b));
    // Spelling out a default does not change the hash.
    const auto d = parse_spec(R"({"name": "x", "fixture": "cole-hopf-bm", "task": "solve", "paths": 2000, "seed": 3, "basis_degree": 3})");
    EXPECT_EQ(spec_hash(a), spec_hash(d));
}

TEST(Spec, ValidationByTask) {
    const FixtureRegistry registry;
    auto spec = parse_spec(R"({"name": "x", "fixture": "tanh-quadratic", "task": "sensitivity", "h_list": [0.1, 0.01]})");
    EXPECT_EQ(code_of([&] { validate_spec(spec, registry); }), ErrorCode::ConfigError);
    spec.h_list.push_back(0.001);
    EXPECT_NO_THROW(validate_spec(spec, registry));

    auto mall = parse_spec(R"({"name": "m", "fixture": "cole-hopf-bm", "task": "malliavin", "theta_list": [50]})");
    EXPECT_EQ(code_of([&] { validate_spec(mall, registry); }), ErrorCode::ConfigError);

    auto unknown = parse_spec(R"({"name": "u", "fixture": "nope", "task": "solve"})");
    EXPECT_EQ(code_of([&] { validate_spec(unknown, registry); }), ErrorCode::UnknownFixture);

    auto alpha = parse_spec(R"({"name": "a", "fixture": "gbm-linear", "task": "solve", "alpha": 1.0})");
    EXPECT_EQ(code_of([&] { validate_spec(alpha, registry); }), ErrorCode::ConfigError);

    auto verify = parse_spec(R"({"name": "v", "fixture": "", "task": "full-verify"})");
    EXPECT_NO_THROW(validate_spec(verify, registry));
}

TEST(Spec, SeedFromEnvironment) {
    unsetenv("BSDELAB_SEED");
    EXPECT_FALSE(seed_from_environment().has_value());
    {
        SeedEnv env("1234");
        EXPECT_EQ(seed_from_environment(), 1234u);
    }
    {
        SeedEnv env("12x");
        EXPECT_EQ(code_of([] { (void)seed_from_environment(); }), ErrorCode::ConfigError);
    }
}
