#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bsdelab/array.hpp"
#include "bsdelab/model.hpp"

namespace bsdelab {

/// Brownian increments [path][step][component], variance dt per entry.
struct BrownianIncrements {
    Array3 values;
    std::uint64_t seed = 0;

    std::size_t paths() const noexcept { return values.extent(0); }
    std::size_t steps() const noexcept { return values.extent(1); }
    std::size_t dim() const noexcept { return values.extent(2); }
};

/// Monte Carlo bundle of forward paths together with their tangent process.
struct PathSet {
    TimeGrid grid;
    std::uint64_t seed = 0;
    std::vector<double> x0;
    Array3 increments;  // [path][step][d]
    Array3 states;      // [path][node][n]
    Array3 variation;   // [path][node][n*n], J(i,k) at i*n + k

    std::size_t paths() const noexcept { return states.extent(0); }
    std::size_t dim_x() const noexcept { return states.extent(2); }
    std::size_t dim_w() const noexcept { return increments.extent(2); }

    /// Brownian motion W at node k of path p (sum of the first k increments).
    std::vector<double> brownian_at(std::size_t path, std::size_t node) const;

    /// Gathers X[., node, .] into a contiguous paths x n block.
    std::vector<double> states_at(std::size_t node) const;
};

/// Gaussian increments for `paths` paths. Path p draws from its own stream keyed
/// by (seed, p), so the result does not depend on how paths are scheduled.
BrownianIncrements simulate_brownian(std::uint64_t seed, std::size_t paths,
                                     const TimeGrid& grid, std::size_t dim_w);

/// Euler-Maruyama for X and the same scheme linearised for J = dX/dx.
/// Throws NonFiniteState naming the first offending (path, node).
PathSet simulate_sde(const SdeModel& model, std::span<const double> x0, const TimeGrid& grid,
                     const BrownianIncrements& increments);

/// Paths for the configured initial point.
PathSet simulate_base(const ExperimentConfig& config);

/// Paths started at x + h e_axis, driven by the same increments as the base run.
PathSet shift_initial(const ExperimentConfig& config, std::size_t axis, double h);

/// CSV dump of the states: path,node,component,value.
std::string path_dump_csv(const PathSet& paths);

}  // namespace bsdelab
