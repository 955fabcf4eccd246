#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bsdelab/array.hpp"
#include "bsdelab/bsde.hpp"
#include "bsdelab/forward.hpp"
#include "bsdelab/model.hpp"
#include "bsdelab/regression.hpp"

namespace bsdelab {

/// (grad Y, grad Z) stacked over the n initial-point axes.
struct VariationalSolution {
    Array3 grad_y;  // [path][node][n]
    Array3 grad_z;  // [path][node][d*n], dZ_j/dx_i at j*n + i
    std::vector<BsdeSolution> axes;  // per-axis linear solves, for diagnostics

    std::size_t dim_x() const noexcept { return grad_y.extent(2); }
};

/// Finite-difference quotients (Y^{x+h e_i} - Y^x)/h on common random numbers.
struct DifferenceQuotient {
    Array2 u;                  // [path][node]
    Array3 v;                  // [path][node][d]
    std::vector<double> zeta;  // (xi(x + h e_i) - xi(x))/h
    double h = 0.0;
    std::size_t axis = 0;
};

enum class FdScheme { Forward, Central };

struct SensitivityRow {
    double h = 0.0;
    double e_sup = 0.0;   // mean over paths of sup_k |U^h - grad Y e_i|^{2p}
    double e_l2_z = 0.0;  // mean over paths of sum_k |V^h - grad Z e_i|^2 dt
    std::size_t paths = 0;
    std::uint64_t seed = 0;
};

struct SensitivityReport {
    std::size_t axis = 0;
    double p = 1.0;
    std::vector<SensitivityRow> rows;  // ordered as the h-list was given
    /// Least-squares slope of log10(E_sup^{1/(2p)}) against log10|h|.
    double slope = 0.0;
    double r_squared = 0.0;
    bool monotone = false;
    double tolerance = 0.0;
    bool pass = false;
    double grad_y0 = 0.0;
    double grad_y0_standard_error = 0.0;
};

struct ConvergenceOptions {
    double p = 1.0;
    double tolerance = 1e-3;
    FdScheme scheme = FdScheme::Forward;
};

struct StabilityRow {
    double epsilon = 0.0;
    double sup_dy = 0.0;  // (mean_p sup_k |dY|^2)^{1/2}
    double l2_dz = 0.0;   // (mean_p sum_k |dZ|^2 dt)^{1/2}
    double ratio_sup = 0.0;  // against the previous row; NaN for the first
    double ratio_l2 = 0.0;
};

/// LSMC solve of the configured BSDE on the given paths.
BsdeSolution solve_config(const ExperimentConfig& config, const PathSet& paths);

/// Solves the differentiated BSDE axis by axis with coefficients frozen at the
/// base solution: terminal grad xi, A = d_x l . J e_i, l-part = d_y l U + d_z l V,
/// H = alpha grad g_n(Z).
VariationalSolution solve_variational_bsde(const BsdeSolution& base, const PathSet& paths,
                                           const QuadraticGenerator& generator,
                                           const TerminalCondition& terminal,
                                           const RegressionBasis& basis,
                                           std::size_t picard_iters = 2);

DifferenceQuotient finite_difference_sensitivity(const ExperimentConfig& config, double h,
                                                 std::size_t axis,
                                                 FdScheme scheme = FdScheme::Forward);

/// Same quotient when the base solution is already available.
DifferenceQuotient finite_difference_sensitivity(const ExperimentConfig& config,
                                                 const BsdeSolution& base, double h,
                                                 std::size_t axis,
                                                 FdScheme scheme = FdScheme::Forward);

/// Throws InsufficientHs unless there are >= 3 distinct |h| spanning >= 2 decades.
SensitivityReport convergence_study(const ExperimentConfig& config, std::span<const double> hs,
                                    std::size_t axis, const ConvergenceOptions& options = {});

/// Solution differences under terminal perturbations xi + eps * eta.
/// eta defaults to sin of the first terminal state component.
std::vector<StabilityRow> stability_diagnostic(
    const ExperimentConfig& config, std::span<const double> epsilons,
    std::function<double(std::span<const double>)> eta = {});

/// Sensitivity CSV: h,E_sup,E_L2_Z,n_paths,seed.
std::string sensitivity_csv(const SensitivityReport& report);

/// Slope summary as structured text.
std::string sensitivity_summary(const SensitivityReport& report);

}  // namespace bsdelab
