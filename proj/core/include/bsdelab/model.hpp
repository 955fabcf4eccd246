#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bsdelab/truncation.hpp"

namespace bsdelab {

/// Uniform partition 0 = t_0 < ... < t_N = T.
class TimeGrid {
public:
    TimeGrid() = default;

    double horizon() const noexcept { return horizon_; }
    std::size_t steps() const noexcept { return steps_; }
    std::size_t node_count() const noexcept { return steps_ + 1; }
    double dt() const noexcept { return dt_; }
    double node(std::size_t k) const noexcept { return nodes_[k]; }
    const std::vector<double>& nodes() const noexcept { return nodes_; }

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

private:
    friend TimeGrid build_grid(double horizon, std::size_t steps);

    double horizon_ = 0.0;
    std::size_t steps_ = 0;
    double dt_ = 0.0;
    std::vector<double> nodes_;
};

/// Throws BadGrid unless horizon > 0 and steps >= 2.
TimeGrid build_grid(double horizon, std::size_t steps);

/// out <- f(t, x)
using StateFn = std::function<void(double t, std::span<const double> x, std::span<double> out)>;

/// Forward coefficients of dX = b(t,X) dt + sigma(t,X) dW.
///
/// Layouts: diffusion is n x d row-major (i*d + j); drift_jacobian is n x n
/// with entry (i, k) = d b_i / d x_k; diffusion_jacobian stores
/// d sigma_ij / d x_k at ((i*d + j)*n + k).
struct SdeModel {
    std::size_t dim_x = 1;
    std::size_t dim_w = 1;
    StateFn drift;
    StateFn diffusion;
    StateFn drift_jacobian;
    StateFn diffusion_jacobian;
    double lipschitz_bound = 0.0;
};

using DriverFn = std::function<double(double t, std::span<const double> x, double y,
                                      std::span<const double> z)>;
using DriverGradientFn = std::function<void(double t, std::span<const double> x, double y,
                                            std::span<const double> z, std::span<double> out)>;

/// Driver f(t,x,y,z) = l(t,x,y,z) + alpha * g_n(z) with l Lipschitz in (y, z).
struct QuadraticGenerator {
    DriverFn lipschitz_part;
    DriverGradientFn dx;  // d l / d x, length n
    DriverFn dy;          // d l / d y
    DriverGradientFn dz;  // d l / d z, length d
    double quad_coeff = 0.0;
    double lipschitz_const = 0.0;
    Truncation truncation;

    double operator()(double t, std::span<const double> x, double y,
                      std::span<const double> z) const {
        return lipschitz_part(t, x, y, z) + quad_coeff * truncation.value(z);
    }

    /// The generator l = 0, used by pure-quadratic fixtures.
    static QuadraticGenerator pure_quadratic(double alpha, std::size_t dim_x);

    /// l(t,x,y,z) = -rate * y.
    static QuadraticGenerator discounting(double rate, double alpha, std::size_t dim_x);
};

enum class TerminalKind {
    FunctionOfState,  // xi = g(X_T)
    DirectSampler,    // xi = xi(x, W_T), x the initial point
};

struct TerminalCondition {
    TerminalKind kind = TerminalKind::FunctionOfState;

    // FunctionOfState
    std::function<double(std::span<const double> x)> value;
    std::function<void(std::span<const double> x, std::span<double> grad)> gradient;

    // DirectSampler: value and gradient in the initial point x.
    std::function<double(std::span<const double> x0, std::span<const double> w_terminal)> sample;
    std::function<void(std::span<const double> x0, std::span<const double> w_terminal,
                       std::span<double> grad)>
        sample_gradient;

    std::optional<double> bound;
};

struct ExperimentConfig {
    SdeModel model;
    QuadraticGenerator generator;
    TerminalCondition terminal;
    TimeGrid grid;
    std::size_t path_count = 10'000;
    std::uint64_t seed = 1;
    std::size_t basis_degree = 3;
    std::size_t picard_iters = 2;
    std::vector<double> initial_point;
    std::vector<double> fd_steps;
    std::filesystem::path output_dir;

    /// Throws InvalidArgument when the config violates its invariants.
    void validate() const;
};

struct ValidationCheck {
    std::string name;
    double observed = 0.0;        // max observed ratio or magnitude
    std::optional<double> limit;  // declared constant; unset for informational checks
    std::size_t violations = 0;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;
    std::size_t probes = 0;

    bool passed() const noexcept;
    std::size_t violation_count() const noexcept;
    const ValidationCheck* find(std::string_view name) const noexcept;
};

/// Spot-checks growth and Lipschitz metadata on `probes` random points.
/// Deterministic in (inputs, probe_seed). Throws NonFiniteCoefficient when a
/// coefficient returns a non-finite value at a probe.
ValidationReport validate_model(const SdeModel& model, const QuadraticGenerator& generator,
                                const TerminalCondition& terminal, std::size_t probes,
                                std::uint64_t probe_seed = 0x5eed);

}  // namespace bsdelab
