#include "bsdelab/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <sstream>

#include "bsdelab/csv.hpp"
#include "bsdelab/error.hpp"
#include "bsdelab/parallel.hpp"

namespace bsdelab {
namespace {

using NodeDriver =
    std::function<double(std::size_t node, std::size_t path, double y, std::span<const double> z)>;

constexpr double kBlowupFactor = 1e6;

double max_abs(std::span<const double> values) {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
}

double sample_sd(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 2) return 0.0;
    const auto sums = blocked_sum(n, 1, [&](std::size_t p, double* acc) { acc[0] += values[p]; });
    const double mean = sums[0] / static_cast<double>(n);
    const auto sq = blocked_sum(n, 1, [&](std::size_t p, double* acc) {
        acc[0] += (values[p] - mean) * (values[p] - mean);
    });
    return std::sqrt(sq[0] / static_cast<double>(n - 1));
}

// Shared backward recursion. The driver is evaluated at (node, path, Y, Z).
BsdeSolution backward_induction(const PathSet& paths, const RegressionBasis& basis,
                                std::span<const double> terminal, std::size_t start_node,
                                std::size_t picard_iters, const NodeDriver& driver,
                                double blowup_limit) {
    const std::size_t m = paths.paths();
    const std::size_t d = paths.dim_w();
    const std::size_t steps = paths.grid.steps();
    const double dt = paths.grid.dt();
    require(terminal.size() == m, ErrorCode::ShapeMismatch, "terminal values do not match paths");
    require(start_node < steps, ErrorCode::InvalidArgument, "start node must precede the horizon");
    require(picard_iters >= 1, ErrorCode::InvalidArgument, "picard_iters must be >= 1");
    require(basis.dim() == paths.dim_x(), ErrorCode::ShapeMismatch,
            "basis dimension does not match the state dimension");

    BsdeSolution sol;
    sol.start_node = start_node;
    sol.y = Array2({m, steps + 1});
    sol.z = Array3({m, steps + 1, d});
    sol.z_se = Array3({m, steps + 1, d});
    sol.residuals.assign(steps, 0.0);
    for (std::size_t p = 0; p < m; ++p) {
        if (!std::isfinite(terminal[p])) {
            fail(ErrorCode::InvalidArgument, "terminal value is non-finite at path " + std::to_string(p));
        }
        sol.y(p, steps) = terminal[p];
    }

    // Pathwise representation xi + sum_k f_k dt, for the start-node standard error.
    std::vector<double> representation(terminal.begin(), terminal.end());
    std::vector<double> next(m), cond(m), target(m), fitted(m), y(m), y_new(m), f(m);
    std::vector<double> lev(m);
    const double denom = static_cast<double>(m > basis.size() ? m - basis.size() : 1);

    for (std::size_t k = steps; k-- > start_node;) {
        const auto states = paths.states_at(k);
        const Regressor regressor(states, m, basis);
        if (regressor.used_ridge()) ++sol.ridge_nodes;
        for (std::size_t p = 0; p < m; ++p) next[p] = sol.y(p, k + 1);

        regressor.fitted(regressor.coefficients(next), cond);

        parallel_for(m, [&](std::size_t b, std::size_t e) {
            for (std::size_t p = b; p < e; ++p) lev[p] = regressor.leverage(p);
        });
        for (std::size_t j = 0; j < d; ++j) {
            // Centring by the conditional mean leaves E[. | F_k] unchanged and
            // removes most of the variance of the product with dW.
            for (std::size_t p = 0; p < m; ++p) {
                target[p] = (next[p] - cond[p]) * paths.increments(p, k, j) / dt;
            }
            regressor.fitted(regressor.coefficients(target), fitted);
            const auto rss = blocked_sum(m, 1, [&](std::size_t p, double* acc) {
                acc[0] += (target[p] - fitted[p]) * (target[p] - fitted[p]);
            });
            const double s = std::sqrt(rss[0] / denom);
            for (std::size_t p = 0; p < m; ++p) {
                sol.z(p, k, j) = fitted[p];
                sol.z_se(p, k, j) = s * std::sqrt(std::max(0.0, lev[p]));
            }
        }

        y = cond;
        for (std::size_t it = 0; it < picard_iters; ++it) {
            parallel_for(m, [&](std::size_t b, std::size_t e) {
                for (std::size_t p = b; p < e; ++p) {
                    y_new[p] = cond[p] + driver(k, p, y[p], sol.z.slice(p, k)) * dt;
                }
            });
            std::swap(y, y_new);
        }
        parallel_for(m, [&](std::size_t b, std::size_t e) {
            for (std::size_t p = b; p < e; ++p) f[p] = driver(k, p, y[p], sol.z.slice(p, k));
        });

        for (std::size_t p = 0; p < m; ++p) {
            if (!std::isfinite(y[p]) || std::abs(y[p]) > blowup_limit) {
                std::ostringstream msg;
                msg << "|Y| exceeded " << blowup_limit << " at node " << k << ", path " << p;
                fail(ErrorCode::Blowup, msg.str());
            }
            sol.y(p, k) = y[p];
            representation[p] += f[p] * dt;
        }

        const auto defect = blocked_sum(m, 1, [&](std::size_t p, double* acc) {
            double r = next[p] - y[p] + f[p] * dt;
            for (std::size_t j = 0; j < d; ++j) r -= sol.z(p, k, j) * paths.increments(p, k, j);
            acc[0] += r * r;
        });
        sol.residuals[k] = std::sqrt(defect[0] / static_cast<double>(m));
    }

    for (std::size_t p = 0; p < m; ++p) {
        for (std::size_t j = 0; j < d; ++j) {
            sol.z(p, steps, j) = sol.z(p, steps - 1, j);
            sol.z_se(p, steps, j) = sol.z_se(p, steps - 1, j);
        }
    }
    sol.y0_standard_error = sample_sd(representation) / std::sqrt(static_cast<double>(m));
    return sol;
}

}  // namespace

double BsdeSolution::y0() const {
    const std::size_t m = paths();
    const auto sums = blocked_sum(m, 1, [&](std::size_t p, double* acc) { acc[0] += y(p, start_node); });
    return sums[0] / static_cast<double>(m);
}

std::vector<double> terminal_values(const TerminalCondition& terminal, const PathSet& paths) {
    const std::size_t m = paths.paths();
    const std::size_t last = paths.grid.steps();
    std::vector<double> xi(m);
    if (terminal.kind == TerminalKind::FunctionOfState) {
        require(static_cast<bool>(terminal.value), ErrorCode::InvalidArgument,
                "terminal condition has no value function");
        parallel_for(m, [&](std::size_t b, std::size_t e) {
            for (std::size_t p = b; p < e; ++p) xi[p] = terminal.value(paths.states.slice(p, last));
        });
    } else {
        require(static_cast<bool>(terminal.sample), ErrorCode::InvalidArgument,
                "terminal condition has no sampler");
        parallel_for(m, [&](std::size_t b, std::size_t e) {
            for (std::size_t p = b; p < e; ++p) {
                const auto w = paths.brownian_at(p, last);
                xi[p] = terminal.sample(paths.x0, w);
            }
        });
    }
    return xi;
}

Array2 terminal_gradients(const TerminalCondition& terminal, const PathSet& paths) {
    const std::size_t m = paths.paths();
    const std::size_t n = paths.dim_x();
    const std::size_t last = paths.grid.steps();
    Array2 out({m, n});
    parallel_for(m, [&](std::size_t b, std::size_t e) {
        std::vector<double> grad(n);
        for (std::size_t p = b; p < e; ++p) {
            auto row = out.slice(p);
            if (terminal.kind == TerminalKind::FunctionOfState) {
                terminal.gradient(paths.states.slice(p, last), grad);
                const auto jac = paths.variation.slice(p, last);
                for (std::size_t i = 0; i < n; ++i) {
                    double v = 0.0;
                    for (std::size_t q = 0; q < n; ++q) v += grad[q] * jac[q * n + i];
                    row[i] = v;
                }
            } else {
                const auto w = paths.brownian_at(p, last);
                terminal.sample_gradient(paths.x0, w, row);
            }
        }
    });
    return out;
}

BsdeSolution solve_lsmc(const QuadraticGenerator& generator, const TerminalCondition& terminal,
                        const PathSet& paths, const RegressionBasis& basis,
                        const Truncation& truncation, std::size_t picard_iters) {
    const auto xi = terminal_values(terminal, paths);
    const double bound = terminal.bound.value_or(max_abs(xi));
    const double alpha = generator.quad_coeff;
    const NodeDriver driver = [&](std::size_t k, std::size_t p, double y,
                                  std::span<const double> z) {
        const double t = paths.grid.node(k);
        const auto x = paths.states.slice(p, k);
        return generator.lipschitz_part(t, x, y, z) + alpha * truncation.value(z);
    };
    auto sol = backward_induction(paths, basis, xi, 0, picard_iters, driver,
                                  kBlowupFactor * (bound + 1.0));
    sol.truncation = truncation;
    return sol;
}

BsdeSolution cole_hopf_solve(double alpha, const TerminalCondition& terminal,
                             const SdeModel& model, const PathSet& paths,
                             const RegressionBasis& basis) {
    require(alpha != 0.0 && std::isfinite(alpha), ErrorCode::InvalidArgument,
            "Cole-Hopf transform needs a non-zero quadratic coefficient");
    const std::size_t m = paths.paths();
    const std::size_t n = paths.dim_x();
    const std::size_t d = paths.dim_w();
    const std::size_t steps = paths.grid.steps();
    const auto xi = terminal_values(terminal, paths);

    std::vector<double> expo(m);
    for (std::size_t p = 0; p < m; ++p) {
        const double a = 2.0 * alpha * xi[p];
        if (!std::isfinite(a) || std::abs(a) > 700.0) {
            std::ostringstream msg;
            msg << "|2 alpha xi| = " << std::abs(a) << " exceeds 700 at path " << p;
            fail(ErrorCode::OverflowInExponent, msg.str());
        }
        expo[p] = std::exp(a);
    }
    const auto [lo_it, hi_it] = std::minmax_element(expo.begin(), expo.end());
    const double lo = *lo_it;
    const double hi = *hi_it;

    BsdeSolution sol;
    sol.y = Array2({m, steps + 1});
    sol.z = Array3({m, steps + 1, d});
    sol.z_se = Array3({m, steps + 1, d});
    sol.residuals.assign(steps, 0.0);
    for (std::size_t p = 0; p < m; ++p) sol.y(p, steps) = xi[p];

    std::unique_ptr<Regressor> later;  // regressor of node k + 1
    Eigen::VectorXd later_beta;
    std::vector<double> fitted(m);
    for (std::size_t k = steps; k-- > 0;) {
        const auto states = paths.states_at(k);
        auto regressor = std::make_unique<Regressor>(states, m, basis);
        if (regressor->used_ridge()) ++sol.ridge_nodes;
        const Eigen::VectorXd beta = regressor->coefficients(expo);
        regressor->fitted(beta, fitted);

        bool degenerate = false;
        for (std::size_t i = 0; i < n; ++i) degenerate = degenerate || regressor->degenerate(i);
        // A degenerate design cannot resolve the surface gradient; borrow the
        // surface of the next node, evaluated at this node's state.
        const Regressor* grad_source = degenerate && later ? later.get() : regressor.get();
        const Eigen::VectorXd& grad_beta = degenerate && later ? later_beta : beta;
        const double t = paths.grid.node(k);

        std::vector<std::size_t> clamped(m, 0);
        parallel_for(m, [&](std::size_t b, std::size_t e) {
            std::vector<double> grad(n), sig(n * d);
            for (std::size_t p = b; p < e; ++p) {
                double value = fitted[p];
                // E[exp(2 alpha xi) | F_k] lies within the range of the targets.
                if (value < lo || value > hi) {
                    value = std::clamp(value, lo, hi);
                    clamped[p] = 1;
                }
                sol.y(p, k) = std::log(value) / (2.0 * alpha);
                const auto x = paths.states.slice(p, k);
                const double level = degenerate && later ? grad_source->surface_value_at(grad_beta, x)
                                                         : value;
                grad_source->surface_gradient_at(grad_beta, x, grad);
                model.diffusion(t, x, sig);
                for (std::size_t j = 0; j < d; ++j) {
                    double zj = 0.0;
                    for (std::size_t i = 0; i < n; ++i) zj += grad[i] * sig[i * d + j];
                    sol.z(p, k, j) = zj / (2.0 * alpha * std::max(level, lo));
                }
            }
        });
        for (auto c : clamped) sol.clamped_values += c;

        const auto defect = blocked_sum(m, 1, [&](std::size_t p, double* acc) {
            double zz = 0.0;
            double r = sol.y(p, k + 1) - sol.y(p, k);
            for (std::size_t j = 0; j < d; ++j) {
                zz += sol.z(p, k, j) * sol.z(p, k, j);
                r -= sol.z(p, k, j) * paths.increments(p, k, j);
            }
            r += alpha * zz * paths.grid.dt();
            acc[0] += r * r;
        });
        sol.residuals[k] = std::sqrt(defect[0] / static_cast<double>(m));

        later = std::move(regressor);
        later_beta = beta;
    }
    for (std::size_t p = 0; p < m; ++p) {
        for (std::size_t j = 0; j < d; ++j) sol.z(p, steps, j) = sol.z(p, steps - 1, j);
    }

    // Delta method for log(mean exp(2 alpha xi)) / (2 alpha).
    const auto sums = blocked_sum(m, 1, [&](std::size_t p, double* acc) { acc[0] += expo[p]; });
    const double mean = sums[0] / static_cast<double>(m);
    sol.y0_standard_error =
        sample_sd(expo) / (std::abs(2.0 * alpha) * mean * std::sqrt(static_cast<double>(m)));
    return sol;
}

BsdeSolution solve_linear_bsde(const LinearDriver& lin, std::span<const double> zeta,
                               const PathSet& paths, const RegressionBasis& basis,
                               std::size_t picard_iters, std::size_t start_node) {
    const std::size_t m = paths.paths();
    const std::size_t d = paths.dim_w();
    const std::size_t nodes = paths.grid.node_count();
    const bool has_h = !lin.h.empty();
    const bool has_a = !lin.a.empty();
    if (has_h) {
        require(lin.h.extent(0) == m && lin.h.extent(1) == nodes && lin.h.extent(2) == d,
                ErrorCode::ShapeMismatch, "H is not aligned with the grid");
        for (double v : lin.h.flat()) {
            require(std::isfinite(v), ErrorCode::InvalidArgument, "H contains non-finite entries");
        }
    }
    if (has_a) {
        require(lin.a.extent(0) == m && lin.a.extent(1) == nodes, ErrorCode::ShapeMismatch,
                "A is not aligned with the grid");
        for (double v : lin.a.flat()) {
            require(std::isfinite(v), ErrorCode::InvalidArgument, "A contains non-finite entries");
        }
    }

    const NodeDriver driver = [&](std::size_t k, std::size_t p, double u,
                                  std::span<const double> v) {
        double value = lin.lipschitz_part ? lin.lipschitz_part(k, p, u, v) : 0.0;
        if (has_h) {
            for (std::size_t j = 0; j < d; ++j) value += lin.h(p, k, j) * v[j];
        }
        if (has_a) value += lin.a(p, k);
        return value;
    };
    return backward_induction(paths, basis, zeta, start_node, picard_iters, driver,
                              kBlowupFactor * (max_abs(zeta) + 1.0));
}

std::string solution_csv(const BsdeSolution& solution) {
    std::ostringstream out;
    const std::size_t d = solution.dim_w();
    out << "path,node,Y";
    for (std::size_t j = 0; j < d; ++j) out << ",Z_" << (j + 1);
    out << '\n';
    for (std::size_t p = 0; p < solution.paths(); ++p) {
        for (std::size_t k = 0; k < solution.node_count(); ++k) {
            out << p << ',' << k << ',' << format_double(solution.y(p, k));
            for (std::size_t j = 0; j < d; ++j) out << ',' << format_double(solution.z(p, k, j));
            out << '\n';
        }
    }
    return out.str();
}

}  // namespace bsdelab
