#include "bsdelab/malliavin.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "bsdelab/csv.hpp"
#include "bsdelab/error.hpp"
#include "bsdelab/parallel.hpp"

namespace bsdelab {
namespace {

constexpr double kDeterminantFloor = 1e-10;
constexpr double kTraceFloor = 1e-12;

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// c = J_θ^{-1} σ(θ, X_θ) e_component on path p.
void theta_direction(const PathSet& paths, const SdeModel& model, std::size_t theta,
                     std::size_t component, std::size_t p, std::span<double> out) {
    const std::size_t n = paths.dim_x();
    const std::size_t d = paths.dim_w();
    const auto jac_span = paths.variation.slice(p, theta);
    const Eigen::Map<const Matrix> jac(jac_span.data(), static_cast<Eigen::Index>(n),
                                       static_cast<Eigen::Index>(n));
    const Eigen::PartialPivLU<Matrix> lu(jac);
    const double det = lu.determinant();
    if (!(std::abs(det) > kDeterminantFloor)) {
        std::ostringstream msg;
        msg << "|det J| = " << std::abs(det) << " at node " << theta << ", path " << p;
        fail(ErrorCode::SingularVariation, msg.str());
    }
    std::vector<double> sig(n * d);
    model.diffusion(paths.grid.node(theta), paths.states.slice(p, theta), sig);
    Eigen::VectorXd column(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) column(static_cast<Eigen::Index>(i)) = sig[i * d + component];
    const Eigen::VectorXd c = lu.solve(column);
    for (std::size_t i = 0; i < n; ++i) out[i] = c(static_cast<Eigen::Index>(i));
}

void check_theta(const PathSet& paths, std::size_t theta, std::size_t component) {
    require(theta < paths.grid.steps(), ErrorCode::InvalidArgument,
            "θ must be a grid node before the horizon");
    require(component < paths.dim_w(), ErrorCode::InvalidArgument,
            "Brownian component out of range");
}

}  // namespace

std::vector<std::size_t> MalliavinDerivative::theta_nodes() const {
    std::vector<std::size_t> out;
    for (const auto& s : slices) out.push_back(s.theta);
    return out;
}

const MalliavinSlice* MalliavinDerivative::find(std::size_t theta) const noexcept {
    for (const auto& s : slices) {
        if (s.theta == theta) return &s;
    }
    return nullptr;
}

double MalliavinDerivative::dy(std::size_t slice, std::size_t path, std::size_t node) const {
    const auto& s = slices.at(slice);
    return node < s.theta ? 0.0 : s.dy(path, node - s.theta);
}

double MalliavinDerivative::dz(std::size_t slice, std::size_t path, std::size_t node,
                               std::size_t j) const {
    const auto& s = slices.at(slice);
    return node < s.theta ? 0.0 : s.dz(path, node - s.theta, j);
}

double MalliavinDerivative::dx(std::size_t slice, std::size_t path, std::size_t node,
                               std::size_t i) const {
    const auto& s = slices.at(slice);
    return node < s.theta ? 0.0 : s.dx(path, node - s.theta, i);
}

Array3 dtheta_forward(const PathSet& paths, const SdeModel& model, std::size_t theta,
                      std::size_t component) {
    check_theta(paths, theta, component);
    const std::size_t m = paths.paths();
    const std::size_t n = paths.dim_x();
    const std::size_t nodes = paths.grid.node_count();
    Array3 out({m, nodes - theta, n});
    // Scan sequentially first so the reported path is the lowest failing index.
    std::vector<double> directions(m * n);
    for (std::size_t p = 0; p < m; ++p) {
        theta_direction(paths, model, theta, component, p,
                        std::span<double>(directions.data() + p * n, n));
    }
    parallel_for(m, [&](std::size_t b, std::size_t e) {
        for (std::size_t p = b; p < e; ++p) {
            const double* c = directions.data() + p * n;
            for (std::size_t k = theta; k < nodes; ++k) {
                const auto jac = paths.variation.slice(p, k);
                for (std::size_t i = 0; i < n; ++i) {
                    double v = 0.0;
                    for (std::size_t q = 0; q < n; ++q) v += jac[i * n + q] * c[q];
                    out(p, k - theta, i) = v;
                }
            }
        }
    });
    return out;
}

MalliavinSlice solve_malliavin_bsde(const BsdeSolution& base, const Array3& dx,
                                    const QuadraticGenerator& generator,
                                    const TerminalCondition& terminal, const PathSet& paths,
                                    const RegressionBasis& basis, std::size_t theta,
                                    const Truncation& truncation, std::size_t picard_iters) {
    if (terminal.kind != TerminalKind::FunctionOfState) {
        fail(ErrorCode::UnsupportedTerminal,
             "Malliavin BSDE needs a terminal condition of the form g(X_T)");
    }
    const std::size_t m = paths.paths();
    const std::size_t n = paths.dim_x();
    const std::size_t d = paths.dim_w();
    const std::size_t nodes = paths.grid.node_count();
    const std::size_t last = paths.grid.steps();
    require(theta < last, ErrorCode::InvalidArgument, "θ must be a grid node before the horizon");
    require(base.paths() == m && base.node_count() == nodes && base.dim_w() == d,
            ErrorCode::ShapeMismatch, "base solution and path bundle differ in shape");
    require(dx.extent(0) == m && dx.extent(1) == nodes - theta && dx.extent(2) == n,
            ErrorCode::ShapeMismatch, "DX slice is not aligned with θ");

    LinearDriver lin;
    lin.h = Array3({m, nodes, d});
    lin.a = Array2({m, nodes});
    Array2 dy({m, nodes});
    Array3 dz({m, nodes, d});
    const double alpha = generator.quad_coeff;
    parallel_for(m, [&](std::size_t b, std::size_t e) {
        std::vector<double> grad(d), gx(n);
        for (std::size_t p = b; p < e; ++p) {
            for (std::size_t k = theta; k < last; ++k) {
                const double t = paths.grid.node(k);
                const auto x = paths.states.slice(p, k);
                const double y = base.y(p, k);
                const auto z = base.z.slice(p, k);
                dy(p, k) = generator.dy(t, x, y, z);
                generator.dz(t, x, y, z, dz.slice(p, k));
                generator.dx(t, x, y, z, gx);
                double a = 0.0;
                for (std::size_t i = 0; i < n; ++i) a += gx[i] * dx(p, k - theta, i);
                lin.a(p, k) = a;
                truncation.gradient(z, grad);
                for (std::size_t j = 0; j < d; ++j) lin.h(p, k, j) = alpha * grad[j];
            }
        }
    });
    lin.lipschitz_part = [&](std::size_t k, std::size_t p, double u, std::span<const double> v) {
        double value = dy(p, k) * u;
        for (std::size_t j = 0; j < d; ++j) value += dz(p, k, j) * v[j];
        return value;
    };

    std::vector<double> zeta(m);
    parallel_for(m, [&](std::size_t b, std::size_t e) {
        std::vector<double> grad(n);
        for (std::size_t p = b; p < e; ++p) {
            terminal.gradient(paths.states.slice(p, last), grad);
            double v = 0.0;
            for (std::size_t i = 0; i < n; ++i) v += grad[i] * dx(p, last - theta, i);
            zeta[p] = v;
        }
    });

    const BsdeSolution sol = solve_linear_bsde(lin, zeta, paths, basis, picard_iters, theta);
    MalliavinSlice slice;
    slice.theta = theta;
    slice.dx = dx;
    slice.dy = Array2({m, nodes - theta});
    slice.dz = Array3({m, nodes - theta, d});
    for (std::size_t p = 0; p < m; ++p) {
        for (std::size_t k = theta; k < nodes; ++k) {
            slice.dy(p, k - theta) = sol.y(p, k);
            for (std::size_t j = 0; j < d; ++j) slice.dz(p, k - theta, j) = sol.z(p, k, j);
        }
    }
    return slice;
}

MalliavinDerivative malliavin_from_bsde(const BsdeSolution& base, const SdeModel& model,
                                        const QuadraticGenerator& generator,
                                        const TerminalCondition& terminal, const PathSet& paths,
                                        const RegressionBasis& basis,
                                        std::span<const std::size_t> thetas,
                                        std::size_t component, std::size_t picard_iters) {
    std::vector<std::size_t> sorted(thetas.begin(), thetas.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    MalliavinDerivative out;
    out.component = component;
    out.node_count = paths.grid.node_count();
    for (std::size_t theta : sorted) {
        const Array3 dx = dtheta_forward(paths, model, theta, component);
        out.slices.push_back(solve_malliavin_bsde(base, dx, generator, terminal, paths, basis,
                                                  theta, base.truncation, picard_iters));
    }
    return out;
}

MalliavinDerivative representation_from_variational(const VariationalSolution& variational,
                                                    const PathSet& paths, const SdeModel& model,
                                                    std::span<const std::size_t> thetas,
                                                    std::size_t component) {
    const std::size_t m = paths.paths();
    const std::size_t n = paths.dim_x();
    const std::size_t d = paths.dim_w();
    const std::size_t nodes = paths.grid.node_count();
    require(variational.grad_y.extent(0) == m && variational.grad_y.extent(1) == nodes &&
                variational.dim_x() == n,
            ErrorCode::ShapeMismatch, "variational solution is not aligned with the paths");

    std::vector<std::size_t> sorted(thetas.begin(), thetas.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    MalliavinDerivative out;
    out.component = component;
    out.node_count = nodes;
    out.dz_advisory = true;
    for (std::size_t theta : sorted) {
        check_theta(paths, theta, component);
        MalliavinSlice slice;
        slice.theta = theta;
        slice.dx = dtheta_forward(paths, model, theta, component);
        slice.dy = Array2({m, nodes - theta});
        slice.dz = Array3({m, nodes - theta, d});
        std::vector<double> directions(m * n);
        for (std::size_t p = 0; p < m; ++p) {
            theta_direction(paths, model, theta, component, p,
                            std::span<double>(directions.data() + p * n, n));
        }
        parallel_for(m, [&](std::size_t b, std::size_t e) {
            for (std::size_t p = b; p < e; ++p) {
                const double* c = directions.data() + p * n;
                for (std::size_t k = theta; k < nodes; ++k) {
                    double y = 0.0;
                    for (std::size_t i = 0; i < n; ++i) y += variational.grad_y(p, k, i) * c[i];
                    slice.dy(p, k - theta) = y;
                    for (std::size_t j = 0; j < d; ++j) {
                        double z = 0.0;
                        for (std::size_t i = 0; i < n; ++i) {
                            z += variational.grad_z(p, k, j * n + i) * c[i];
                        }
                        slice.dz(p, k - theta, j) = z;
                    }
                }
            }
        });
        out.slices.push_back(std::move(slice));
    }
    return out;
}

TraceReport trace_check(const BsdeSolution& solution, const MalliavinDerivative& derivative,
                        std::optional<double> z_bound) {
    const std::size_t m = solution.paths();
    const std::size_t last = solution.node_count() - 1;
    const std::size_t j = derivative.component;
    TraceReport report;
    report.z_bound = z_bound;
    for (std::size_t s = 0; s < derivative.slices.size(); ++s) {
        const std::size_t k = derivative.slices[s].theta;
        if (k >= last || k < solution.start_node) continue;
        require(derivative.slices[s].dy.extent(0) == m, ErrorCode::ShapeMismatch,
                "Malliavin derivative and solution differ in path count");
        const auto sums = blocked_sum(m, 2, [&](std::size_t p, double* acc) {
            const double z = solution.z(p, k, j);
            const double diff = z - derivative.dy(s, p, k);
            acc[0] += diff * diff;
            acc[1] += z * z;
        });
        const double count = static_cast<double>(m);
        report.nodes.push_back(k);
        report.distances.push_back(std::sqrt(sums[0] / count) /
                                   (std::sqrt(sums[1] / count) + kTraceFloor));
    }
    if (report.nodes.empty()) {
        fail(ErrorCode::MissingDiagonal, "no θ node before the horizon to compare with Z");
    }
    double total = 0.0;
    for (double v : report.distances) total += v;
    report.aggregate = total / static_cast<double>(report.distances.size());

    for (std::size_t k = solution.start_node; k < last; ++k) {
        for (std::size_t p = 0; p < m; ++p) {
            const double z = std::abs(solution.z(p, k, j));
            if (z > report.max_abs_z) {
                report.max_abs_z = z;
                report.max_node = k;
                report.bound_standard_error = solution.z_se(p, k, j);
            }
        }
    }
    if (z_bound) {
        report.bound_holds = report.max_abs_z <= *z_bound + 5.0 * report.bound_standard_error;
    }
    return report;
}

double route_distance(const MalliavinDerivative& a, const MalliavinDerivative& b) {
    double num = 0.0;
    double den = 0.0;
    bool any = false;
    for (std::size_t s = 0; s < a.slices.size(); ++s) {
        const auto* other = b.find(a.slices[s].theta);
        if (other == nullptr) continue;
        const auto& lhs = a.slices[s].dy;
        const auto& rhs = other->dy;
        require(lhs.extent(0) == rhs.extent(0) && lhs.extent(1) == rhs.extent(1),
                ErrorCode::ShapeMismatch, "Malliavin slices differ in shape");
        const std::size_t width = lhs.extent(1);
        const auto sums = blocked_sum(lhs.extent(0), 2, [&](std::size_t p, double* acc) {
            for (std::size_t k = 0; k < width; ++k) {
                const double diff = lhs(p, k) - rhs(p, k);
                acc[0] += diff * diff;
                acc[1] += rhs(p, k) * rhs(p, k);
            }
        });
        num += sums[0];
        den += sums[1];
        any = true;
    }
    require(any, ErrorCode::MissingDiagonal, "the two derivatives share no θ node");
    if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::sqrt(num / den);
}

double sobolev_norm(const BsdeSolution& solution, const MalliavinDerivative& derivative,
                    const TimeGrid& grid, std::size_t node, double p) {
    require(p >= 1.0, ErrorCode::InvalidArgument, "Sobolev exponent must be >= 1");
    require(node < solution.node_count(), ErrorCode::InvalidArgument, "node out of range");
    const std::size_t m = solution.paths();
    // Riemann weight of θ_s is the gap to the next θ (or to `node`).
    std::vector<std::pair<std::size_t, double>> weights;
    const auto& grid_slices = derivative.slices;
    for (std::size_t s = 0; s < grid_slices.size(); ++s) {
        const std::size_t theta = grid_slices[s].theta;
        if (theta > node) break;
        const std::size_t next = s + 1 < grid_slices.size()
                                     ? std::min(grid_slices[s + 1].theta, node)
                                     : node;
        weights.emplace_back(s, next > theta ? grid.node(next) - grid.node(theta) : 0.0);
    }
    const auto sums = blocked_sum(m, 2, [&](std::size_t path, double* acc) {
        acc[0] += std::pow(std::abs(solution.y(path, node)), p);
        double energy = 0.0;
        for (const auto& [s, w] : weights) {
            const double v = derivative.dy(s, path, node);
            energy += v * v * w;
        }
        acc[1] += std::pow(energy, p / 2.0);
    });
    return std::pow((sums[0] + sums[1]) / static_cast<double>(m), 1.0 / p);
}

std::string malliavin_csv(const MalliavinDerivative& derivative) {
    std::ostringstream out;
    const std::size_t d = derivative.slices.empty() ? 0 : derivative.slices.front().dz.extent(2);
    out << "path,theta_node,node,DY";
    for (std::size_t j = 0; j < d; ++j) out << ",DZ_" << (j + 1);
    out << '\n';
    for (const auto& slice : derivative.slices) {
        for (std::size_t p = 0; p < slice.dy.extent(0); ++p) {
            for (std::size_t k = 0; k < slice.dy.extent(1); ++k) {
                out << p << ',' << slice.theta << ',' << (slice.theta + k) << ','
                    << format_double(slice.dy(p, k));
                for (std::size_t j = 0; j < d; ++j) out << ',' << format_double(slice.dz(p, k, j));
                out << '\n';
            }
        }
    }
    return out.str();
}

std::string trace_summary(const TraceReport& report) {
    std::ostringstream out;
    out << "aggregate = " << format_double(report.aggregate) << '\n'
        << "nodes = " << report.nodes.size() << '\n'
        << "max_abs_z = " << format_double(report.max_abs_z) << '\n'
        << "max_node = " << report.max_node << '\n';
    if (report.z_bound) {
        out << "z_bound = " << format_double(*report.z_bound) << '\n'
            << "bound_se = " << format_double(report.bound_standard_error) << '\n'
            << "bound_holds = " << (report.bound_holds ? "true" : "false") << '\n';
    }
    for (std::size_t i = 0; i < report.nodes.size(); ++i) {
        out << "distance[" << report.nodes[i] << "] = " << format_double(report.distances[i]) << '\n';
    }
    return out.str();
}

}  // namespace bsdelab
