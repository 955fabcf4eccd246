#include "bsdelab/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "bsdelab/csv.hpp"
#include "bsdelab/error.hpp"
#include "bsdelab/parallel.hpp"

namespace bsdelab {
namespace {

// Quotient errors at or below this level are rounding, not signal.
constexpr double kRoundoffFloor = 1e-24;

double mean_of(std::size_t count, const std::function<double(std::size_t)>& term) {
    const auto sums = blocked_sum(count, 1, [&](std::size_t p, double* acc) { acc[0] += term(p); });
    return sums[0] / static_cast<double>(count);
}

struct LineFit {
    double slope = std::numeric_limits<double>::quiet_NaN();
    double r_squared = std::numeric_limits<double>::quiet_NaN();
};

LineFit fit_line(std::span<const double> xs, std::span<const double> ys) {
    LineFit fit;
    const std::size_t n = xs.size();
    if (n < 2) return fit;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx <= 0.0) return fit;
    fit.slope = sxy / sxx;
    fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

TerminalCondition perturbed_terminal(const TerminalCondition& base, double epsilon,
                                     const std::function<double(std::span<const double>)>& eta) {
    TerminalCondition out = base;
    if (base.kind == TerminalKind::FunctionOfState) {
        out.value = [g = base.value, eta, epsilon](std::span<const double> x) {
            return g(x) + epsilon * eta(x);
        };
    } else {
        out.sample = [s = base.sample, eta, epsilon](std::span<const double> x0,
                                                     std::span<const double> w) {
            return s(x0, w) + epsilon * eta(w);
        };
    }
    out.bound.reset();
    return out;
}

}  // namespace

BsdeSolution solve_config(const ExperimentConfig& config, const PathSet& paths) {
    const RegressionBasis basis(config.model.dim_x, config.basis_degree);
    return solve_lsmc(config.generator, config.terminal, paths, basis,
                      config.generator.truncation, config.picard_iters);
}

VariationalSolution solve_variational_bsde(const BsdeSolution& base, const PathSet& paths,
                                           const QuadraticGenerator& generator,
                                           const TerminalCondition& terminal,
                                           const RegressionBasis& basis,
                                           std::size_t picard_iters) {
    const std::size_t m = paths.paths();
    const std::size_t n = paths.dim_x();
    const std::size_t d = paths.dim_w();
    const std::size_t nodes = paths.grid.node_count();
    if (base.paths() != m || base.node_count() != nodes || base.dim_w() != d) {
        fail(ErrorCode::ShapeMismatch, "base solution and path bundle differ in shape");
    }

    // Coefficients frozen on the base solution (Y^x, Z^x).
    Array2 dy({m, nodes});
    Array3 dz({m, nodes, d});
    Array3 h({m, nodes, d});
    Array3 dx({m, nodes, n});
    const double alpha = generator.quad_coeff;
    parallel_for(m, [&](std::size_t b, std::size_t e) {
        std::vector<double> grad(d);
        for (std::size_t p = b; p < e; ++p) {
            for (std::size_t k = 0; k + 1 < nodes; ++k) {
                const double t = paths.grid.node(k);
                const auto x = paths.states.slice(p, k);
                const double y = base.y(p, k);
                const auto z = base.z.slice(p, k);
                dy(p, k) = generator.dy(t, x, y, z);
                generator.dz(t, x, y, z, dz.slice(p, k));
                generator.dx(t, x, y, z, dx.slice(p, k));
                base.truncation.gradient(z, grad);
                for (std::size_t j = 0; j < d; ++j) h(p, k, j) = alpha * grad[j];
            }
        }
    });

    const Array2 grad_xi = terminal_gradients(terminal, paths);

    VariationalSolution out;
    out.grad_y = Array3({m, nodes, n});
    out.grad_z = Array3({m, nodes, d * n});
    for (std::size_t i = 0; i < n; ++i) {
        LinearDriver lin;
        lin.lipschitz_part = [&](std::size_t k, std::size_t p, double u,
                                 std::span<const double> v) {
            double value = dy(p, k) * u;
            for (std::size_t j = 0; j < d; ++j) value += dz(p, k, j) * v[j];
            return value;
        };
        lin.h = h;
        lin.a = Array2({m, nodes});
        for (std::size_t p = 0; p < m; ++p) {
            for (std::size_t k = 0; k + 1 < nodes; ++k) {
                const auto jac = paths.variation.slice(p, k);
                double a = 0.0;
                for (std::size_t q = 0; q < n; ++q) a += dx(p, k, q) * jac[q * n + i];
                lin.a(p, k) = a;
            }
        }
        std::vector<double> zeta(m);
        for (std::size_t p = 0; p < m; ++p) zeta[p] = grad_xi(p, i);

        BsdeSolution axis = solve_linear_bsde(lin, zeta, paths, basis, picard_iters);
        for (std::size_t p = 0; p < m; ++p) {
            for (std::size_t k = 0; k < nodes; ++k) {
                out.grad_y(p, k, i) = axis.y(p, k);
                for (std::size_t j = 0; j < d; ++j) out.grad_z(p, k, j * n + i) = axis.z(p, k, j);
            }
        }
        out.axes.push_back(std::move(axis));
    }
    return out;
}

DifferenceQuotient finite_difference_sensitivity(const ExperimentConfig& config, double h,
                                                 std::size_t axis, FdScheme scheme) {
    require(h != 0.0 && std::isfinite(h), ErrorCode::InvalidArgument,
            "finite-difference step must be finite and non-zero");
    const PathSet paths = simulate_base(config);
    const BsdeSolution base = solve_config(config, paths);
    return finite_difference_sensitivity(config, base, h, axis, scheme);
}

DifferenceQuotient finite_difference_sensitivity(const ExperimentConfig& config,
                                                 const BsdeSolution& base, double h,
                                                 std::size_t axis, FdScheme scheme) {
    require(h != 0.0 && std::isfinite(h), ErrorCode::InvalidArgument,
            "finite-difference step must be finite and non-zero");
    const PathSet up_paths = shift_initial(config, axis, h);
    const BsdeSolution up = solve_config(config, up_paths);
    const auto xi_up = terminal_values(config.terminal, up_paths);

    const BsdeSolution* low = &base;
    BsdeSolution down;
    std::vector<double> xi_low;
    double span = h;
    if (scheme == FdScheme::Central) {
        const PathSet down_paths = shift_initial(config, axis, -h);
        down = solve_config(config, down_paths);
        xi_low = terminal_values(config.terminal, down_paths);
        low = &down;
        span = 2.0 * h;
    } else {
        xi_low = terminal_values(config.terminal, simulate_base(config));
    }

    const std::size_t m = up.paths();
    const std::size_t nodes = up.node_count();
    const std::size_t d = up.dim_w();
    require(low->paths() == m && low->node_count() == nodes, ErrorCode::ShapeMismatch,
            "base solution does not match the configured run");

    DifferenceQuotient q;
    q.h = h;
    q.axis = axis;
    q.u = Array2({m, nodes});
    q.v = Array3({m, nodes, d});
    q.zeta.resize(m);
    for (std::size_t p = 0; p < m; ++p) {
        q.zeta[p] = (xi_up[p] - xi_low[p]) / span;
        for (std::size_t k = 0; k < nodes; ++k) {
            q.u(p, k) = (up.y(p, k) - low->y(p, k)) / span;
            for (std::size_t j = 0; j < d; ++j) {
                q.v(p, k, j) = (up.z(p, k, j) - low->z(p, k, j)) / span;
            }
        }
    }
    return q;
}

SensitivityReport convergence_study(const ExperimentConfig& config, std::span<const double> hs,
                                    std::size_t axis, const ConvergenceOptions& options) {
    std::set<double> distinct;
    double smallest = std::numeric_limits<double>::infinity();
    double largest = 0.0;
    for (double h : hs) {
        require(h != 0.0 && std::isfinite(h), ErrorCode::InvalidArgument,
                "finite-difference steps must be finite and non-zero");
        distinct.insert(std::abs(h));
        smallest = std::min(smallest, std::abs(h));
        largest = std::max(largest, std::abs(h));
    }
    if (distinct.size() < 3 || largest < 100.0 * smallest * (1.0 - 1e-12)) {
        fail(ErrorCode::InsufficientHs,
             "convergence study needs >= 3 distinct steps spanning >= 2 decades");
    }
    require(options.p >= 1.0, ErrorCode::InvalidArgument, "exponent p must be >= 1");
    require(axis < config.model.dim_x, ErrorCode::InvalidArgument, "axis out of range");

    const PathSet paths = simulate_base(config);
    const BsdeSolution base = solve_config(config, paths);
    const RegressionBasis basis(config.model.dim_x, config.basis_degree);
    const VariationalSolution var = solve_variational_bsde(
        base, paths, config.generator, config.terminal, basis, config.picard_iters);

    const std::size_t m = paths.paths();
    const std::size_t nodes = paths.grid.node_count();
    const std::size_t n = paths.dim_x();
    const std::size_t d = paths.dim_w();
    const double dt = paths.grid.dt();

    SensitivityReport report;
    report.axis = axis;
    report.p = options.p;
    report.tolerance = options.tolerance;
    report.grad_y0 = var.axes[axis].y0();
    report.grad_y0_standard_error = var.axes[axis].y0_standard_error;

    for (double h : hs) {
        const DifferenceQuotient q =
            finite_difference_sensitivity(config, base, h, axis, options.scheme);
        SensitivityRow row;
        row.h = h;
        row.paths = m;
        row.seed = config.seed;
        row.e_sup = mean_of(m, [&](std::size_t p) {
            double sup = 0.0;
            for (std::size_t k = 0; k < nodes; ++k) {
                sup = std::max(sup, std::abs(q.u(p, k) - var.grad_y(p, k, axis)));
            }
            return std::pow(sup, 2.0 * options.p);
        });
        row.e_l2_z = mean_of(m, [&](std::size_t p) {
            double acc = 0.0;
            for (std::size_t k = 0; k + 1 < nodes; ++k) {
                for (std::size_t j = 0; j < d; ++j) {
                    const double diff = q.v(p, k, j) - var.grad_z(p, k, j * n + axis);
                    acc += diff * diff * dt;
                }
            }
            return acc;
        });
        report.rows.push_back(row);
    }

    // Order by decreasing |h| for the monotonicity check.
    std::vector<SensitivityRow> by_step = report.rows;
    std::sort(by_step.begin(), by_step.end(),
              [](const auto& a, const auto& b) { return std::abs(a.h) > std::abs(b.h); });
    report.monotone = true;
    for (std::size_t i = 1; i < by_step.size(); ++i) {
        const double prev = std::max(by_step[i - 1].e_sup, kRoundoffFloor);
        const double cur = std::max(by_step[i].e_sup, kRoundoffFloor);
        if (cur > prev) report.monotone = false;
    }

    std::vector<double> xs, ys;
    for (const auto& row : by_step) {
        if (row.e_sup > 0.0) {
            xs.push_back(std::log10(std::abs(row.h)));
            ys.push_back(std::log10(std::pow(row.e_sup, 1.0 / (2.0 * options.p))));
        }
    }
    const LineFit fit = fit_line(xs, ys);
    report.slope = fit.slope;
    report.r_squared = fit.r_squared;
    report.pass = report.monotone && by_step.back().e_sup < options.tolerance;
    return report;
}

std::vector<StabilityRow> stability_diagnostic(
    const ExperimentConfig& config, std::span<const double> epsilons,
    std::function<double(std::span<const double>)> eta) {
    require(epsilons.size() >= 2, ErrorCode::InvalidArgument,
            "stability diagnostic needs at least two perturbation sizes");
    for (double eps : epsilons) {
        require(eps >= 0.0 && std::isfinite(eps), ErrorCode::InvalidArgument,
                "perturbation sizes must be finite and non-negative");
    }
    if (!eta) {
        eta = [](std::span<const double> x) { return std::sin(x[0]); };
    }

    const PathSet paths = simulate_base(config);
    const BsdeSolution base = solve_config(config, paths);
    const RegressionBasis basis(config.model.dim_x, config.basis_degree);
    const std::size_t m = paths.paths();
    const std::size_t nodes = paths.grid.node_count();
    const std::size_t d = paths.dim_w();
    const double dt = paths.grid.dt();

    std::vector<StabilityRow> rows;
    for (double eps : epsilons) {
        const TerminalCondition terminal = perturbed_terminal(config.terminal, eps, eta);
        const BsdeSolution sol = solve_lsmc(config.generator, terminal, paths, basis,
                                            config.generator.truncation, config.picard_iters);
        StabilityRow row;
        row.epsilon = eps;
        row.sup_dy = std::sqrt(mean_of(m, [&](std::size_t p) {
            double sup = 0.0;
            for (std::size_t k = 0; k < nodes; ++k) sup = std::max(sup, std::abs(sol.y(p, k) - base.y(p, k)));
            return sup * sup;
        }));
        row.l2_dz = std::sqrt(mean_of(m, [&](std::size_t p) {
            double acc = 0.0;
            for (std::size_t k = 0; k + 1 < nodes; ++k) {
                for (std::size_t j = 0; j < d; ++j) {
                    const double diff = sol.z(p, k, j) - base.z(p, k, j);
                    acc += diff * diff * dt;
                }
            }
            return acc;
        }));
        const double nan = std::numeric_limits<double>::quiet_NaN();
        row.ratio_sup = nan;
        row.ratio_l2 = nan;
        if (!rows.empty()) {
            const auto& prev = rows.back();
            row.ratio_sup = prev.sup_dy > 0.0 ? row.sup_dy / prev.sup_dy : nan;
            row.ratio_l2 = prev.l2_dz > 0.0 ? row.l2_dz / prev.l2_dz : nan;
        }
        rows.push_back(row);
    }
    return rows;
}

std::string sensitivity_csv(const SensitivityReport& report) {
    std::ostringstream out;
    out << "h,E_sup,E_L2_Z,n_paths,seed\n";
    for (const auto& row : report.rows) {
        out << format_double(row.h) << ',' << format_double(row.e_sup) << ','
            << format_double(row.e_l2_z) << ',' << row.paths << ',' << row.seed << '\n';
    }
    return out.str();
}

std::string sensitivity_summary(const SensitivityReport& report) {
    std::ostringstream out;
    out << "axis = " << report.axis << '\n'
        << "p = " << format_double(report.p) << '\n'
        << "slope = " << format_double(report.slope) << '\n'
        << "r_squared = " << format_double(report.r_squared) << '\n'
        << "monotone = " << (report.monotone ? "true" : "false") << '\n'
        << "tolerance = " << format_double(report.tolerance) << '\n'
        << "grad_y0 = " << format_double(report.grad_y0) << '\n'
        << "grad_y0_se = " << format_double(report.grad_y0_standard_error) << '\n'
        << "pass = " << (report.pass ? "true" : "false") << '\n';
    return out.str();
}

}  // namespace bsdelab
