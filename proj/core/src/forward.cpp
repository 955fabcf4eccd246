#include "bsdelab/forward.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "bsdelab/csv.hpp"
#include "bsdelab/error.hpp"
#include "bsdelab/parallel.hpp"

namespace bsdelab {

std::vector<double> PathSet::brownian_at(std::size_t path, std::size_t node) const {
    std::vector<double> w(dim_w(), 0.0);
    for (std::size_t k = 0; k < node; ++k) {
        const auto dw = increments.slice(path, k);
        for (std::size_t j = 0; j < w.size(); ++j) w[j] += dw[j];
    }
    return w;
}

std::vector<double> PathSet::states_at(std::size_t node) const {
    const std::size_t n = dim_x();
    std::vector<double> out(paths() * n);
    for (std::size_t p = 0; p < paths(); ++p) {
        const auto x = states.slice(p, node);
        std::copy(x.begin(), x.end(), out.begin() + static_cast<std::ptrdiff_t>(p * n));
    }
    return out;
}

BrownianIncrements simulate_brownian(std::uint64_t seed, std::size_t paths, const TimeGrid& grid,
                                     std::size_t dim_w) {
    require(paths >= 1, ErrorCode::InvalidArgument, "need at least one path");
    require(dim_w >= 1, ErrorCode::InvalidArgument, "Brownian dimension must be positive");
    BrownianIncrements out{Array3({paths, grid.steps(), dim_w}), seed};
    const double sd = std::sqrt(grid.dt());
    parallel_for(paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            std::seed_seq key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                              static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(p >> 32)};
            std::mt19937_64 engine(key);
            std::normal_distribution<double> normal(0.0, 1.0);
            auto row = out.values.slice(p);
            for (double& v : row) v = sd * normal(engine);
        }
    });
    return out;
}

PathSet simulate_sde(const SdeModel& model, std::span<const double> x0, const TimeGrid& grid,
                     const BrownianIncrements& increments) {
    const std::size_t n = model.dim_x;
    const std::size_t d = model.dim_w;
    const std::size_t paths = increments.paths();
    require(x0.size() == n, ErrorCode::ShapeMismatch, "x0 does not match dim_x");
    require(increments.dim() == d && increments.steps() == grid.steps(), ErrorCode::ShapeMismatch,
            "increments are not shaped for this grid and Brownian dimension");

    PathSet out;
    out.grid = grid;
    out.seed = increments.seed;
    out.x0.assign(x0.begin(), x0.end());
    out.increments = increments.values;
    out.states = Array3({paths, grid.node_count(), n});
    out.variation = Array3({paths, grid.node_count(), n * n});

    const double dt = grid.dt();
    constexpr std::size_t kNoFailure = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> failed_node(paths, kNoFailure);

    parallel_for(paths, [&](std::size_t begin, std::size_t end) {
        std::vector<double> b(n), sig(n * d), jb(n * n), js(n * d * n), next_j(n * n);
        for (std::size_t p = begin; p < end; ++p) {
            auto x_first = out.states.slice(p, 0);
            std::copy(x0.begin(), x0.end(), x_first.begin());
            auto j_first = out.variation.slice(p, 0);
            for (std::size_t i = 0; i < n; ++i) j_first[i * n + i] = 1.0;

            for (std::size_t k = 0; k < grid.steps(); ++k) {
                const double t = grid.node(k);
                const auto x = out.states.slice(p, k);
                const auto jac = out.variation.slice(p, k);
                const auto dw = out.increments.slice(p, k);
                model.drift(t, x, b);
                model.diffusion(t, x, sig);
                model.drift_jacobian(t, x, jb);
                model.diffusion_jacobian(t, x, js);

                auto x_next = out.states.slice(p, k + 1);
                bool finite = true;
                for (std::size_t i = 0; i < n; ++i) {
                    double v = x[i] + b[i] * dt;
                    for (std::size_t j = 0; j < d; ++j) v += sig[i * d + j] * dw[j];
                    x_next[i] = v;
                    finite = finite && std::isfinite(v);
                }

                // J_{k+1} = J + (db J) dt + sum_j (d sigma_{.j} J) dW^j
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t c = 0; c < n; ++c) {
                        double v = jac[i * n + c];
                        for (std::size_t m = 0; m < n; ++m) {
                            double coeff = jb[i * n + m] * dt;
                            for (std::size_t j = 0; j < d; ++j) {
                                coeff += js[(i * d + j) * n + m] * dw[j];
                            }
                            v += coeff * jac[m * n + c];
                        }
                        next_j[i * n + c] = v;
                        finite = finite && std::isfinite(v);
                    }
                }
                auto j_next = out.variation.slice(p, k + 1);
                std::copy(next_j.begin(), next_j.end(), j_next.begin());
                if (!finite) {
                    failed_node[p] = k + 1;
                    break;
                }
            }
        }
    });

    for (std::size_t p = 0; p < paths; ++p) {
        if (failed_node[p] != kNoFailure) {
            std::ostringstream msg;
            msg << "forward state became non-finite at path " << p << ", node " << failed_node[p];
            fail(ErrorCode::NonFiniteState, msg.str());
        }
    }
    return out;
}

PathSet simulate_base(const ExperimentConfig& config) {
    config.validate();
    const auto increments =
        simulate_brownian(config.seed, config.path_count, config.grid, config.model.dim_w);
    return simulate_sde(config.model, config.initial_point, config.grid, increments);
}

PathSet shift_initial(const ExperimentConfig& config, std::size_t axis, double h) {
    require(h != 0.0 && std::isfinite(h), ErrorCode::InvalidArgument,
            "shift must be finite and non-zero");
    require(axis < config.model.dim_x, ErrorCode::InvalidArgument, "axis out of range");
    config.validate();
    std::vector<double> x = config.initial_point;
    x[axis] += h;
    const auto increments =
        simulate_brownian(config.seed, config.path_count, config.grid, config.model.dim_w);
    return simulate_sde(config.model, x, config.grid, increments);
}

std::string path_dump_csv(const PathSet& paths) {
    std::ostringstream out;
    out << "path,node,component,value\n";
    for (std::size_t p = 0; p < paths.paths(); ++p) {
        for (std::size_t k = 0; k < paths.grid.node_count(); ++k) {
            const auto x = paths.states.slice(p, k);
            for (std::size_t i = 0; i < x.size(); ++i) {
                out << p << ',' << k << ',' << i << ',' << format_double(x[i]) << '\n';
            }
        }
    }
    return out.str();
}

}  // namespace bsdelab
