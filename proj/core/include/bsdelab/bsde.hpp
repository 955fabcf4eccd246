#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "bsdelab/array.hpp"
#include "bsdelab/forward.hpp"
#include "bsdelab/model.hpp"
#include "bsdelab/regression.hpp"
#include "bsdelab/truncation.hpp"

namespace bsdelab {

/// Discrete solution (Y, Z) of a BSDE on the path bundle.
///
/// Y[., N] is the terminal condition exactly. Z has no value of its own at the
/// terminal node: Z[., N] repeats Z[., N-1] and is never integrated. Nodes
/// before `start_node` are zero (used by the Malliavin sub-grid solves).
struct BsdeSolution {
    Array2 y;     // [path][node]
    Array3 z;     // [path][node][d]
    Array3 z_se;  // OLS prediction standard error of each Z entry
    /// Per node k < N: RMS over paths of Y_{k+1} - Y_k + f_k dt - Z_k . dW_k.
    std::vector<double> residuals;
    std::size_t ridge_nodes = 0;
    std::size_t clamped_values = 0;
    Truncation truncation;
    std::size_t start_node = 0;
    /// Standard error of Y at the start node, estimated from the pathwise
    /// representation xi + sum_k f_k dt.
    double y0_standard_error = std::numeric_limits<double>::quiet_NaN();

    std::size_t paths() const noexcept { return y.extent(0); }
    std::size_t node_count() const noexcept { return y.extent(1); }
    std::size_t dim_w() const noexcept { return z.extent(2); }

    /// Sample mean of Y at the start node.
    double y0() const;
};

/// Coefficients of the linear driver l(t, U, V) + H_t . V + A_t.
struct LinearDriver {
    /// l(node, path, u, v); an empty function means l = 0.
    std::function<double(std::size_t node, std::size_t path, double u, std::span<const double> v)>
        lipschitz_part;
    Array3 h;  // [path][node][d]; empty means H = 0
    Array2 a;  // [path][node]; empty means A = 0
};

/// xi per path: g(X_T) or the direct sampler at (x0, W_T).
std::vector<double> terminal_values(const TerminalCondition& terminal, const PathSet& paths);

/// grad_x xi per path [path][n]: grad g(X_T) J_T, or the sampler gradient.
Array2 terminal_gradients(const TerminalCondition& terminal, const PathSet& paths);

/// Backward least-squares Monte Carlo for Y_t = xi + int f ds - int Z dW.
///
/// At each node Z is regressed from the martingale increment first and then
/// frozen inside f, while Y is Picard-iterated `picard_iters` times starting
/// from the conditional mean. The quadratic part is alpha * g_n(Z) with the
/// given truncation. Throws Blowup if |Y| exceeds 1e6 * (bound + 1).
BsdeSolution solve_lsmc(const QuadraticGenerator& generator, const TerminalCondition& terminal,
                        const PathSet& paths, const RegressionBasis& basis,
                        const Truncation& truncation, std::size_t picard_iters);

/// Exact solver for f = alpha |z|^2 via Y = log E[exp(2 alpha xi) | F_t] / (2 alpha),
/// with Z = grad(Y surface) sigma. Throws OverflowInExponent if |2 alpha xi| > 700.
BsdeSolution cole_hopf_solve(double alpha, const TerminalCondition& terminal,
                             const SdeModel& model, const PathSet& paths,
                             const RegressionBasis& basis);

/// Same backward recursion for the linear driver, started from `zeta` at T
/// and solved on nodes [start_node, N].
BsdeSolution solve_linear_bsde(const LinearDriver& driver, std::span<const double> zeta,
                               const PathSet& paths, const RegressionBasis& basis,
                               std::size_t picard_iters, std::size_t start_node = 0);

/// CSV export: path,node,Y,Z_1..Z_d.
std::string solution_csv(const BsdeSolution& solution);

}  // namespace bsdelab
