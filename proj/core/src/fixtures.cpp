#include "bsdelab/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <memory>
#include <sstream>

#include "bsdelab/error.hpp"
#include "bsdelab/quadrature.hpp"

namespace bsdelab {
namespace {

// tanh is singular at i pi / 2, at least pi / 2 off the real axis in standard
// units while sd <= 1, so the trapezoid error is of order exp(-pi^2 / step).
constexpr double kTrapezoidStep = 0.2;
constexpr double kTrapezoidWidth = 9.0;

// dX = drift_rate X dt + (vol_const + vol_rate X) dW in one dimension.
SdeModel affine_model(double drift_rate, double vol_const, double vol_rate, double bound) {
    SdeModel model;
    model.dim_x = 1;
    model.dim_w = 1;
    model.drift = [drift_rate](double, std::span<const double> x, std::span<double> out) {
        out[0] = drift_rate * x[0];
    };
    model.diffusion = [vol_const, vol_rate](double, std::span<const double> x,
                                            std::span<double> out) {
        out[0] = vol_const + vol_rate * x[0];
    };
    model.drift_jacobian = [drift_rate](double, std::span<const double>, std::span<double> out) {
        out[0] = drift_rate;
    };
    model.diffusion_jacobian = [vol_rate](double, std::span<const double>, std::span<double> out) {
        out[0] = vol_rate;
    };
    model.lipschitz_bound = bound;
    return model;
}

TerminalCondition identity_terminal() {
    TerminalCondition term;
    term.value = [](std::span<const double> x) { return x[0]; };
    term.gradient = [](std::span<const double>, std::span<double> g) { g[0] = 1.0; };
    return term;
}

TerminalCondition tanh_terminal() {
    TerminalCondition term;
    term.value = [](std::span<const double> x) { return std::tanh(x[0]); };
    term.gradient = [](std::span<const double> x, std::span<double> g) {
        const double c = std::cosh(x[0]);
        g[0] = 1.0 / (c * c);
    };
    term.bound = 1.0;
    return term;
}

double tanh_slope(double x) {
    const double c = std::cosh(x);
    return 1.0 / (c * c);
}

std::vector<double> initial_or(const FixtureOverrides& o, double fallback) {
    if (o.initial_point) {
        require(o.initial_point->size() == 1, ErrorCode::ConfigError,
                "fixture is one-dimensional; initial_point needs one entry");
        return *o.initial_point;
    }
    return {fallback};
}

void apply_truncation(Fixture& f, const FixtureOverrides& o) {
    if (o.truncation) f.generator.truncation = Truncation(*o.truncation);
}

// Quadratic references for l = 0 and terminal tanh when X_T | X_t = x is
// N(mean_factor(t) x, var(t)).
void tanh_quadrature_reference(Fixture& f, double alpha, std::function<double(double)> mean_factor,
                               std::function<double(double)> variance, double vol) {
    auto rule = std::make_shared<const NormalRule>(normal_trapezoid(kTrapezoidStep, kTrapezoidWidth));
    const double a = 2.0 * alpha;
    f.reference.kind = ReferenceKind::Quadrature;
    f.reference.oracle = "trapezoid rule (step 0.2 on +-9 sd) of the Cole-Hopf expectation";
    f.reference.y = [rule, a, mean_factor, variance](double t, std::span<const double> x) {
        const double mean = mean_factor(t) * x[0];
        const double sd = std::sqrt(std::max(0.0, variance(t)));
        if (a == 0.0) return normal_expectation(*rule, mean, sd, [](double v) { return std::tanh(v); });
        const double e = normal_expectation(*rule, mean, sd,
                                            [a](double v) { return std::exp(a * std::tanh(v)); });
        return std::log(e) / a;
    };
    f.reference.z = [rule, a, mean_factor, variance, vol](double t, std::span<const double> x) {
        const double factor = mean_factor(t);
        const double mean = factor * x[0];
        const double sd = std::sqrt(std::max(0.0, variance(t)));
        const double num = normal_expectation(*rule, mean, sd, [a](double v) {
            return std::exp(a * std::tanh(v)) * tanh_slope(v);
        });
        const double den = normal_expectation(*rule, mean, sd,
                                              [a](double v) { return std::exp(a * std::tanh(v)); });
        return factor * num / den * vol;
    };
    const double x0 = f.initial_point[0];
    const std::vector<double> start{x0};
    f.reference.y0 = f.reference.y(0.0, start);
    f.reference.grad_y0 = f.reference.z(0.0, start) / vol;
}

Fixture additive_linear(const FixtureOverrides& o) {
    constexpr double rate = 0.1;
    Fixture f;
    f.name = "additive-linear";
    f.description = "X = x0 + W, xi = X_T, f = -0.1 y";
    f.model = affine_model(0.0, 1.0, 0.0, 1.0);
    f.generator = QuadraticGenerator::discounting(rate, 0.0, 1);
    f.terminal = identity_terminal();
    f.horizon = o.horizon.value_or(1.0);
    f.initial_point = initial_or(o, 0.0);
    f.z_bound = 1.0;
    apply_truncation(f, o);
    const double big_t = f.horizon;
    auto discount = [big_t](double t) { return std::exp(-rate * (big_t - t)); };
    f.reference.kind = ReferenceKind::ClosedForm;
    f.reference.oracle = "Y_t = exp(-0.1 (T - t)) X_t, Z_t = exp(-0.1 (T - t))";
    f.reference.y = [discount](double t, std::span<const double> x) { return discount(t) * x[0]; };
    f.reference.z = [discount](double t, std::span<const double>) { return discount(t); };
    f.reference.grad_y = [discount](double t, std::span<const double>) { return discount(t); };
    f.reference.dy = [discount](double, double t, std::span<const double>, std::span<const double>) {
        return discount(t);
    };
    f.reference.y0 = discount(0.0) * f.initial_point[0];
    f.reference.grad_y0 = discount(0.0);
    return f;
}

Fixture gbm_linear(const FixtureOverrides& o) {
    constexpr double mu = 0.05;
    constexpr double vol = 0.2;
    Fixture f;
    f.name = "gbm-linear";
    f.description = "dX = 0.05 X dt + 0.2 X dW, xi = X_T, f = -0.05 y";
    f.model = affine_model(mu, 0.0, vol, 0.25);
    f.generator = QuadraticGenerator::discounting(mu, 0.0, 1);
    f.terminal = identity_terminal();
    f.horizon = o.horizon.value_or(1.0);
    f.initial_point = initial_or(o, 1.0);
    require(f.initial_point[0] > 0.0, ErrorCode::ConfigError,
            "gbm-linear needs a positive initial point");
    apply_truncation(f, o);
    const double x0 = f.initial_point[0];
    f.reference.kind = ReferenceKind::ClosedForm;
    f.reference.oracle = "Y_t = X_t, Z_t = 0.2 X_t, grad Y_t = X_t / x0, D_θ Y_t = 0.2 X_t";
    f.reference.y = [](double, std::span<const double> x) { return x[0]; };
    f.reference.z = [](double, std::span<const double> x) { return vol * x[0]; };
    f.reference.grad_y = [x0](double, std::span<const double> x) { return x[0] / x0; };
    f.reference.dy = [](double, double, std::span<const double>, std::span<const double> x_t) {
        return vol * x_t[0];
    };
    f.reference.y0 = x0;
    f.reference.grad_y0 = 1.0;
    return f;
}

Fixture cole_hopf_bm(const FixtureOverrides& o) {
    Fixture f;
    f.name = "cole-hopf-bm";
    f.description = "X = x0 + W, xi = X_T, f = alpha |z|^2";
    const double alpha = o.alpha.value_or(0.5);
    f.model = affine_model(0.0, 1.0, 0.0, 1.0);
    f.generator = QuadraticGenerator::pure_quadratic(alpha, 1);
    f.terminal = identity_terminal();
    f.horizon = o.horizon.value_or(1.0);
    f.initial_point = initial_or(o, 0.0);
    f.z_bound = 1.0;
    apply_truncation(f, o);
    const double big_t = f.horizon;
    f.reference.kind = ReferenceKind::ClosedForm;
    f.reference.oracle = "Y_t = X_t + alpha (T - t) from the Gaussian moment generating function";
    f.reference.y = [alpha, big_t](double t, std::span<const double> x) {
        return x[0] + alpha * (big_t - t);
    };
    f.reference.z = [](double, std::span<const double>) { return 1.0; };
    f.reference.grad_y = [](double, std::span<const double>) { return 1.0; };
    f.reference.dy = [](double, double, std::span<const double>, std::span<const double>) {
        return 1.0;
    };
    f.reference.y0 = f.initial_point[0] + alpha * big_t;
    f.reference.grad_y0 = 1.0;
    return f;
}

Fixture tanh_quadratic(const FixtureOverrides& o) {
    Fixture f;
    f.name = "tanh-quadratic";
    f.description = "X = x0 + W, xi = tanh(X_T), f = alpha |z|^2";
    const double alpha = o.alpha.value_or(0.5);
    f.model = affine_model(0.0, 1.0, 0.0, 1.0);
    f.generator = QuadraticGenerator::pure_quadratic(alpha, 1);
    f.terminal = tanh_terminal();
    f.horizon = o.horizon.value_or(1.0);
    f.initial_point = initial_or(o, 0.5);
    f.z_bound = 1.0;
    apply_truncation(f, o);
    const double big_t = f.horizon;
    tanh_quadrature_reference(
        f, alpha, [](double) { return 1.0; }, [big_t](double t) { return big_t - t; }, 1.0);
    return f;
}

Fixture fbsde_tanh(const FixtureOverrides& o) {
    constexpr double kappa = 0.5;
    constexpr double vol = 0.4;
    Fixture f;
    f.name = "fbsde-tanh";
    f.description = "dX = -0.5 X dt + 0.4 dW, xi = tanh(X_T), f = alpha |z|^2";
    const double alpha = o.alpha.value_or(0.5);
    f.model = affine_model(-kappa, vol, 0.0, 0.5);
    f.generator = QuadraticGenerator::pure_quadratic(alpha, 1);
    f.terminal = tanh_terminal();
    f.horizon = o.horizon.value_or(1.0);
    f.initial_point = initial_or(o, 0.3);
    f.z_bound = vol;
    apply_truncation(f, o);
    const double big_t = f.horizon;
    tanh_quadrature_reference(
        f, alpha, [big_t](double t) { return std::exp(-kappa * (big_t - t)); },
        [big_t](double t) {
            return vol * vol * (1.0 - std::exp(-2.0 * kappa * (big_t - t))) / (2.0 * kappa);
        },
        vol);
    f.reference.oracle = "Gauss-Hermite (64 nodes) of the Cole-Hopf expectation, Gaussian OU transition";
    // z = dY/dx * vol, and grad Y_0 = dY/dx at t = 0 since J_0 = 1.
    return f;
}

}  // namespace

std::string to_string(ReferenceKind kind) {
    switch (kind) {
        case ReferenceKind::ClosedForm: return "closed-form";
        case ReferenceKind::Quadrature: return "quadrature-reference";
        case ReferenceKind::None: return "none";
    }
    return "none";
}

FixtureRegistry::FixtureRegistry() {
    entries_.push_back({"additive-linear", false, additive_linear});
    entries_.push_back({"gbm-linear", false, gbm_linear});
    entries_.push_back({"cole-hopf-bm", true, cole_hopf_bm});
    entries_.push_back({"tanh-quadratic", true, tanh_quadratic});
    entries_.push_back({"fbsde-tanh", true, fbsde_tanh});
}

std::vector<std::string> FixtureRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& e : entries_) out.push_back(e.name);
    return out;
}

bool FixtureRegistry::contains(std::string_view name) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const Entry& e) { return e.name == name; });
}

Fixture FixtureRegistry::make(std::string_view name, const FixtureOverrides& overrides) const {
    for (const auto& e : entries_) {
        if (e.name != name) continue;
        if (overrides.alpha && !e.alpha_override) {
            fail(ErrorCode::ConfigError,
                 "fixture '" + e.name + "' does not support overriding alpha");
        }
        if (overrides.alpha) {
            require(std::isfinite(*overrides.alpha) && *overrides.alpha >= 0.0,
                    ErrorCode::ConfigError, "alpha must be finite and non-negative");
        }
        if (overrides.horizon) {
            require(std::isfinite(*overrides.horizon) && *overrides.horizon > 0.0,
                    ErrorCode::ConfigError, "horizon must be positive");
        }
        if (overrides.truncation) {
            require(*overrides.truncation > 0.0, ErrorCode::ConfigError,
                    "truncation level must be positive");
        }
        return e.build(overrides);
    }
    fail(ErrorCode::UnknownFixture, "unknown fixture '" + std::string(name) + "'");
}

std::vector<FixtureInfo> FixtureRegistry::list() const {
    std::vector<FixtureInfo> out;
    for (const auto& e : entries_) {
        const Fixture f = e.build({});
        out.push_back({f.name, f.model.dim_x, f.model.dim_w, f.generator.quad_coeff,
                       f.generator.lipschitz_const, f.reference.kind});
    }
    return out;
}

std::string list_fixtures(const FixtureRegistry& registry) {
    std::ostringstream out;
    out << std::left << std::setw(18) << "name" << std::setw(4) << "n" << std::setw(4) << "d"
        << std::setw(8) << "alpha" << std::setw(8) << "M" << "reference" << '\n';
    for (const auto& info : registry.list()) {
        out << std::left << std::setw(18) << info.name << std::setw(4) << info.dim_x
            << std::setw(4) << info.dim_w << std::setw(8) << info.alpha << std::setw(8)
            << info.lipschitz_const << to_string(info.reference) << '\n';
    }
    return out.str();
}

ExperimentConfig make_config(const Fixture& fixture, std::size_t steps, std::size_t paths,
                             std::uint64_t seed, std::size_t basis_degree,
                             std::size_t picard_iters) {
    ExperimentConfig config;
    config.model = fixture.model;
    config.generator = fixture.generator;
    config.terminal = fixture.terminal;
    config.grid = build_grid(fixture.horizon, steps);
    config.path_count = paths;
    config.seed = seed;
    config.basis_degree = basis_degree;
    config.picard_iters = picard_iters;
    config.initial_point = fixture.initial_point;
    config.validate();
    return config;
}

}  // namespace bsdelab
