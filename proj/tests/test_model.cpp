#include <gtest/gtest.h>

#include <cmath>

#include "bsdelab/error.hpp"
#include "bsdelab/fixtures.hpp"
#include "bsdelab/model.hpp"

using namespace bsdelab;

TEST(Grid, UniformNodesEndAtHorizon) {
    const TimeGrid grid = build_grid(2.0, 8);
    EXPECT_EQ(grid.node_count(), 9u);
    EXPECT_DOUBLE_EQ(grid.dt(), 0.25);
    EXPECT_EQ(grid.node(0), 0.0);
    EXPECT_EQ(grid.node(8), 2.0);
}

TEST(Grid, RejectsBadInput) {
    for (auto [t, n] : {std::pair{0.0, 10}, {-1.0, 10}, {1.0, 1}, {INFINITY, 10}}) {
        try {
            (void)build_grid(t, static_cast<std::size_t>(n));
            ADD_FAILURE() << "accepted T=" << t << " N=" << n;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::BadGrid);
        }
    }
}

TEST(Registry, HasFiveFixturesWithReferences) {
    const FixtureRegistry registry;
    const auto rows = registry.list();
    ASSERT_EQ(rows.size(), 5u);
    for (const auto& row : rows) {
        EXPECT_EQ(row.dim_x, 1u);
        EXPECT_EQ(row.dim_w, 1u);
        EXPECT_NE(row.reference, ReferenceKind::None) << row.name;
    }
    EXPECT_TRUE(registry.contains("cole-hopf-bm"));
    EXPECT_FALSE(registry.contains("nope"));
    try {
        (void)registry.make("nope");
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownFixture);
    }
}

TEST(Registry, EveryFixturePassesModelValidation) {
    const FixtureRegistry registry;
    for (const auto& name : registry.names()) {
        const Fixture f = registry.make(name);
        const ValidationReport report = validate_model(f.model, f.generator, f.terminal, 500);
        EXPECT_TRUE(report.passed()) << name;
        EXPECT_EQ(report.probes, 500u);
        ASSERT_NE(report.find("terminal_bound"), nullptr);
        if (f.terminal.bound) {
            EXPECT_LE(report.find("terminal_bound")->observed, *f.terminal.bound) << name;
        }
    }
}

TEST(Registry, AlphaOverrideOnlyWhereReferenceHolds) {
    const FixtureRegistry registry;
    FixtureOverrides o;
    o.alpha = 0.25;
    EXPECT_DOUBLE_EQ(registry.make("cole-hopf-bm", o).generator.quad_coeff, 0.25);
    EXPECT_DOUBLE_EQ(registry.make("cole-hopf-bm", o).reference.y0, 0.25);
    try {
        (void)registry.make("additive-linear", o);
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ConfigError);
    }
}

TEST(Validation, FlagsUnderstatedLipschitzConstant) {
    const FixtureRegistry registry;
    Fixture f = registry.make("additive-linear");
    f.generator.lipschitz_const = 0.01;  // true |d_y l| is 0.1
    const ValidationReport report = validate_model(f.model, f.generator, f.terminal, 200);
    EXPECT_FALSE(report.passed());
    EXPECT_GT(report.find("generator_dy_bound")->violations, 0u);
}

TEST(Validation, DeterministicInProbeSeed) {
    const FixtureRegistry registry;
    const Fixture f = registry.make("fbsde-tanh");
    const auto a = validate_model(f.model, f.generator, f.terminal, 300, 9);
    const auto b = validate_model(f.model, f.generator, f.terminal, 300, 9);
    ASSERT_EQ(a.checks.size(), b.checks.size());
    for (std::size_t i = 0; i < a.checks.size(); ++i) {
        EXPECT_EQ(a.checks[i].observed, b.checks[i].observed);
    }
}

TEST(Validation, NonFiniteCoefficientIsReported) {
    const FixtureRegistry registry;
    Fixture f = registry.make("additive-linear");
    f.model.drift = [](double, std::span<const double>, std::span<double> out) { out[0] = NAN; };
    try {
        (void)validate_model(f.model, f.generator, f.terminal, 10);
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonFiniteCoefficient);
    }
}

TEST(Config, RejectsMismatchedInitialPoint) {
    const FixtureRegistry registry;
    ExperimentConfig c = make_config(registry.make("additive-linear"), 10, 200, 1);
    c.initial_point = {0.0, 0.0};
    EXPECT_THROW(c.validate(), Error);
}
