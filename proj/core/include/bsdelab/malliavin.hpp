#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bsdelab/array.hpp"
#include "bsdelab/bsde.hpp"
#include "bsdelab/forward.hpp"
#include "bsdelab/model.hpp"
#include "bsdelab/regression.hpp"
#include "bsdelab/sensitivity.hpp"

namespace bsdelab {

/// Derivatives in the direction of one Brownian component at a single node θ.
/// Arrays start at θ: entry [p][k - θ] belongs to node k.
struct MalliavinSlice {
    std::size_t theta = 0;
    Array2 dy;  // [path][node - θ]
    Array3 dz;  // [path][node - θ][d]
    Array3 dx;  // [path][node - θ][n]
};

/// D_θ(X, Y, Z) over a set of θ nodes, for Brownian component `component`.
/// Values before θ are zero by adaptedness and are not stored.
struct MalliavinDerivative {
    std::size_t component = 0;
    std::size_t node_count = 0;
    std::vector<MalliavinSlice> slices;  // ascending θ
    /// True when DZ came from the representation formula (advisory only).
    bool dz_advisory = false;

    std::vector<std::size_t> theta_nodes() const;
    const MalliavinSlice* find(std::size_t theta) const noexcept;

    double dy(std::size_t slice, std::size_t path, std::size_t node) const;
    double dz(std::size_t slice, std::size_t path, std::size_t node, std::size_t j) const;
    double dx(std::size_t slice, std::size_t path, std::size_t node, std::size_t i) const;
};

struct TraceReport {
    std::vector<std::size_t> nodes;
    /// ||Z[., k] - DY[., k, k]|| / (||Z[., k]|| + floor), RMS over paths.
    std::vector<double> distances;
    double aggregate = 0.0;
    double max_abs_z = 0.0;
    std::size_t max_node = 0;
    /// Bound M on |D xi| declared by the fixture, when available.
    std::optional<double> z_bound;
    double bound_standard_error = 0.0;
    bool bound_holds = true;
};

/// DX[p, k] = J_k J_θ^{-1} σ(θ, X_θ) e_component for k >= θ.
/// Throws SingularVariation when |det J_θ| <= 1e-10 on some path.
Array3 dtheta_forward(const PathSet& paths, const SdeModel& model, std::size_t theta,
                      std::size_t component = 0);

/// Solves the linear BSDE satisfied by D_θ(Y, Z) on [θ, T]: terminal grad g(X_T) DX_T,
/// driver d_x l DX + d_y l U + d_z l V + alpha grad g_n(Z) . V on the base solution.
/// Needs a state-function terminal condition.
MalliavinSlice solve_malliavin_bsde(const BsdeSolution& base, const Array3& dx_from_theta,
                                    const QuadraticGenerator& generator,
                                    const TerminalCondition& terminal, const PathSet& paths,
                                    const RegressionBasis& basis, std::size_t theta,
                                    const Truncation& truncation, std::size_t picard_iters = 2);

/// Malliavin BSDE over every θ in `thetas`.
MalliavinDerivative malliavin_from_bsde(const BsdeSolution& base, const SdeModel& model,
                                        const QuadraticGenerator& generator,
                                        const TerminalCondition& terminal, const PathSet& paths,
                                        const RegressionBasis& basis,
                                        std::span<const std::size_t> thetas,
                                        std::size_t component = 0, std::size_t picard_iters = 2);

/// DY = grad Y_k J_θ^{-1} σ(θ, X_θ); DZ likewise from grad Z (advisory).
MalliavinDerivative representation_from_variational(const VariationalSolution& variational,
                                                    const PathSet& paths, const SdeModel& model,
                                                    std::span<const std::size_t> thetas,
                                                    std::size_t component = 0);

/// Compares Z[., k] with the diagonal DY[., k, k] on every θ node below T.
/// Throws MissingDiagonal when no such node exists.
TraceReport trace_check(const BsdeSolution& solution, const MalliavinDerivative& derivative,
                        std::optional<double> z_bound = std::nullopt);

/// Relative L^2 distance of DY between two routes over common θ nodes and k >= θ.
double route_distance(const MalliavinDerivative& a, const MalliavinDerivative& b);

/// Grid quadrature of the D^{1,p} norm of Y at node k:
/// (E|Y_k|^p + E(sum_θ |D_θ Y_k|^2 dθ)^{p/2})^{1/p}.
double sobolev_norm(const BsdeSolution& solution, const MalliavinDerivative& derivative,
                    const TimeGrid& grid, std::size_t node, double p);

/// CSV dump: path,theta_node,node,DY,DZ_1..DZ_d.
std::string malliavin_csv(const MalliavinDerivative& derivative);

std::string trace_summary(const TraceReport& report);

}  // namespace bsdelab
