#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bsdelab/model.hpp"

namespace bsdelab {

enum class ReferenceKind { ClosedForm, Quadrature, None };

std::string to_string(ReferenceKind kind);

using StateScalarFn = std::function<double(double t, std::span<const double> x)>;

/// Reference values of a fixture, all for the first Brownian component and
/// the first state axis.
struct FixtureReference {
    ReferenceKind kind = ReferenceKind::None;
    std::string oracle;  // how the reference was derived
    StateScalarFn y;      // Y_t as a function of (t, X_t)
    StateScalarFn z;      // Z_t
    StateScalarFn grad_y; // dY_t/dx (closed-form fixtures only)
    /// D_θ Y_t from (θ, t, X_θ, X_t) (closed-form fixtures only).
    std::function<double(double theta, double t, std::span<const double> x_theta,
                         std::span<const double> x_t)>
        dy;
    double y0 = 0.0;
    double grad_y0 = 0.0;
};

struct Fixture {
    std::string name;
    std::string description;
    SdeModel model;
    QuadraticGenerator generator;
    TerminalCondition terminal;
    double horizon = 1.0;
    std::vector<double> initial_point;
    FixtureReference reference;
    /// Bound on |D_t xi| when the fixture has one; Z is bounded by it.
    std::optional<double> z_bound;
};

struct FixtureOverrides {
    std::optional<double> alpha;
    std::optional<double> horizon;
    std::optional<std::vector<double>> initial_point;
    std::optional<double> truncation;
};

struct FixtureInfo {
    std::string name;
    std::size_t dim_x = 0;
    std::size_t dim_w = 0;
    double alpha = 0.0;
    double lipschitz_const = 0.0;
    ReferenceKind reference = ReferenceKind::None;
};

/// Compiled-in fixtures. The quadratic coefficient can be overridden only where
/// the reference stays valid (cole-hopf-bm, tanh-quadratic, fbsde-tanh).
class FixtureRegistry {
public:
    FixtureRegistry();

    std::vector<std::string> names() const;
    bool contains(std::string_view name) const;

    /// Throws UnknownFixture for an unregistered name, ConfigError for an
    /// override the fixture does not support.
    Fixture make(std::string_view name, const FixtureOverrides& overrides = {}) const;

    std::vector<FixtureInfo> list() const;

private:
    struct Entry {
        std::string name;
        bool alpha_override = false;
        std::function<Fixture(const FixtureOverrides&)> build;
    };
    std::vector<Entry> entries_;
};

/// Plain-text table: name, n, d, alpha, M, reference.
std::string list_fixtures(const FixtureRegistry& registry);

/// Experiment config on a uniform grid of `steps` steps.
ExperimentConfig make_config(const Fixture& fixture, std::size_t steps, std::size_t paths,
                             std::uint64_t seed, std::size_t basis_degree = 3,
                             std::size_t picard_iters = 2);

}  // namespace bsdelab
