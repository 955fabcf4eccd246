#include "bsdelab/bmo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "bsdelab/csv.hpp"
#include "bsdelab/error.hpp"
#include "bsdelab/parallel.hpp"

namespace bsdelab {
namespace {

constexpr double kExponentLimit = 700.0;
constexpr double kQuantile = 0.999;

double quantile(std::vector<double> values, double level) {
    if (values.empty()) return 0.0;
    const std::size_t idx = static_cast<std::size_t>(
        std::ceil(level * static_cast<double>(values.size()))) - 1;
    const std::size_t pos = std::min(idx, values.size() - 1);
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(pos), values.end());
    return values[pos];
}

}  // namespace

double psi_excess(double excess) {
    if (!(excess > 0.0)) fail(ErrorCode::DomainError, "Ψ needs x > 1");
    return psi_log_excess(std::log(excess));
}

double psi_log_excess(double log_excess) {
    if (std::isnan(log_excess)) fail(ErrorCode::DomainError, "Ψ needs x > 1");
    if (log_excess == -std::numeric_limits<double>::infinity()) {
        return std::numeric_limits<double>::infinity();
    }
    const double excess = std::exp(log_excess);
    if (std::isinf(excess)) return 0.0;
    // log((2x - 1)/(2(x - 1))) = log1p(1 / (2(x - 1))) = log1p(2e) - log(2e)
    const double log_term = log_excess < 0.0
                                ? std::log1p(2.0 * excess) - std::log(2.0) - log_excess
                                : std::log1p(0.5 / excess);
    const double x = 1.0 + excess;
    const double s = log_term / (x * x);
    // sqrt(1 + s) - 1 without cancellation.
    return s / (std::sqrt(1.0 + s) + 1.0);
}

double psi(double x) {
    if (!(x > 1.0)) fail(ErrorCode::DomainError, "Ψ is defined for x > 1 only");
    return psi_excess(x - 1.0);
}

HolderExponents find_r(double alpha, double bmo_norm, double r_cap) {
    require(alpha >= 0.0 && bmo_norm >= 0.0 && std::isfinite(alpha) && std::isfinite(bmo_norm),
            ErrorCode::InvalidArgument, "alpha and D must be finite and non-negative");
    require(r_cap > 1.0 && std::isfinite(r_cap), ErrorCode::InvalidArgument,
            "r_cap must be finite and exceed 1");
    const double threshold = 2.0 * alpha * bmo_norm;

    auto finish = [&](double log_excess) {
        HolderExponents h;
        h.log_r_excess = log_excess;
        h.r_excess = std::exp(log_excess);
        h.q = 1.0 + std::exp(-log_excess);
        h.slack = psi_log_excess(log_excess) - threshold;
        return h;
    };
    const double hi_start = std::log(r_cap - 1.0);
    if (psi_log_excess(hi_start) > threshold) {
        // exp(log(r_cap - 1)) can round above the cap.
        HolderExponents h = finish(hi_start);
        h.r_excess = r_cap - 1.0;
        h.q = r_cap / (r_cap - 1.0);
        return h;
    }

    // Ψ(1 + e^L) ~ sqrt(-L - log 2) - 1 as L -> -inf, so a feasible L exists for
    // every finite threshold; walk down until one is found.
    double lo = std::min(hi_start, -1.0);
    while (!(psi_log_excess(lo) > threshold)) lo *= 2.0;

    // Ψ decreases in the excess; keep lo feasible and hi infeasible.
    double hi = hi_start;
    while (hi - lo > 1e-8) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (psi_log_excess(mid) > threshold) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return finish(lo);
}

BmoEstimate estimate_bmo2(const Array3& z, const PathSet& paths, const RegressionBasis& basis) {
    const std::size_t m = paths.paths();
    const std::size_t d = paths.dim_w();
    const std::size_t steps = paths.grid.steps();
    const double dt = paths.grid.dt();
    require(z.extent(0) == m && z.extent(1) >= steps && z.extent(2) == d, ErrorCode::ShapeMismatch,
            "Z is not aligned with the path bundle");
    for (double v : z.flat()) {
        require(std::isfinite(v), ErrorCode::InvalidArgument, "Z contains non-finite entries");
    }

    BmoEstimate est;
    est.tail_energy = Array2({m, steps + 1});
    std::vector<double> tail(m, 0.0), fitted(m), roots(m);
    double best = 0.0;
    for (std::size_t k = steps; k-- > 0;) {
        for (std::size_t p = 0; p < m; ++p) {
            double zz = 0.0;
            for (std::size_t j = 0; j < d; ++j) zz += z(p, k, j) * z(p, k, j);
            tail[p] += zz * dt;
        }
        const Regressor regressor(paths.states_at(k), m, basis);
        regressor.fitted(regressor.coefficients(tail), fitted);
        for (std::size_t p = 0; p < m; ++p) {
            double e = fitted[p];
            est.min_raw = std::min(est.min_raw, e);
            if (e < 0.0) {
                ++est.clipped;
                e = 0.0;
            }
            est.tail_energy(p, k) = e;
            roots[p] = std::sqrt(e);
        }
        const double level = quantile(roots, kQuantile);
        if (level >= best) {
            best = level;
            est.argmax_node = k;
        }
    }
    est.norm = best;
    return est;
}

GirsanovWeights girsanov_weights(const Array3& h, const PathSet& paths) {
    const std::size_t m = paths.paths();
    const std::size_t d = paths.dim_w();
    const std::size_t steps = paths.grid.steps();
    const double dt = paths.grid.dt();
    require(h.extent(0) == m && h.extent(1) >= steps && h.extent(2) == d, ErrorCode::ShapeMismatch,
            "H is not aligned with the path bundle");
    GirsanovWeights out;
    out.weights.resize(m);
    std::vector<double> exponents(m);
    parallel_for(m, [&](std::size_t b, std::size_t e) {
        for (std::size_t p = b; p < e; ++p) {
            double s = 0.0;
            for (std::size_t k = 0; k < steps; ++k) {
                for (std::size_t j = 0; j < d; ++j) {
                    const double v = h(p, k, j);
                    s += v * paths.increments(p, k, j) - 0.5 * v * v * dt;
                }
            }
            exponents[p] = s;
        }
    });
    for (std::size_t p = 0; p < m; ++p) {
        if (!std::isfinite(exponents[p]) || std::abs(exponents[p]) > kExponentLimit) {
            std::ostringstream msg;
            msg << "stochastic exponent " << exponents[p] << " out of range at path " << p;
            fail(ErrorCode::OverflowInExponent, msg.str());
        }
        out.weights[p] = std::exp(exponents[p]);
    }

    const double count = static_cast<double>(m);
    const auto first = blocked_sum(m, 1, [&](std::size_t p, double* acc) { acc[0] += out.weights[p]; });
    out.mean = first[0] / count;
    const auto central = blocked_sum(m, 2, [&](std::size_t p, double* acc) {
        const double c = out.weights[p] - out.mean;
        acc[0] += c * c;
        acc[1] += c * c * c * c;
    });
    const double m2 = central[0] / count;
    const double m4 = central[1] / count;
    out.variance = m > 1 ? central[0] / (count - 1.0) : 0.0;
    out.mean_standard_error = std::sqrt(out.variance / count);
    out.variance_standard_error = std::sqrt(std::max(0.0, m4 - m2 * m2) / count);
    return out;
}

MomentBound moment_bound_diagnostic(const BsdeSolution& solution, std::span<const double> zeta,
                                    const Array2& a, const TimeGrid& grid,
                                    const HolderExponents& exponents, double p,
                                    double lipschitz_const) {
    const std::size_t m = solution.paths();
    const std::size_t steps = grid.steps();
    const std::size_t d = solution.dim_w();
    const double dt = grid.dt();
    require(p >= 1.0, ErrorCode::InvalidArgument, "moment exponent p must be >= 1");
    require(zeta.size() == m, ErrorCode::ShapeMismatch, "terminal values do not match paths");
    require(solution.node_count() == steps + 1, ErrorCode::ShapeMismatch,
            "solution is not on the given grid");
    require(a.empty() || (a.extent(0) == m && a.extent(1) >= steps), ErrorCode::ShapeMismatch,
            "A is not aligned with the solution");

    MomentBound out;
    out.p = p;
    out.q = exponents.q;
    out.beta = lipschitz_const * lipschitz_const + 2.0 * lipschitz_const;
    const double power = 2.0 * p * out.q * out.q;
    const auto sums = blocked_sum(m, 3, [&](std::size_t path, double* acc) {
        double sup = 0.0;
        double energy = 0.0;
        double free = 0.0;
        for (std::size_t k = solution.start_node; k <= steps; ++k) {
            sup = std::max(sup, std::abs(solution.y(path, k)));
        }
        for (std::size_t k = solution.start_node; k < steps; ++k) {
            for (std::size_t j = 0; j < d; ++j) energy += solution.z(path, k, j) * solution.z(path, k, j) * dt;
            if (!a.empty()) free += std::abs(a(path, k)) * dt;
        }
        acc[0] += std::pow(sup, 2.0 * p);
        acc[1] += std::pow(energy, p);
        acc[2] += std::pow(std::abs(zeta[path]), power) + std::pow(free, power);
    });
    const double count = static_cast<double>(m);
    out.lhs = (sums[0] + sums[1]) / count;
    out.rhs = std::pow(sums[2] / count, 1.0 / (out.q * out.q));
    if (out.rhs == 0.0) {
        out.ratio = out.lhs == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    } else {
        out.ratio = out.lhs / out.rhs;
    }
    out.pass = std::isfinite(out.ratio);
    return out;
}

std::string bmo_report(const BmoEstimate& estimate, const HolderExponents& exponents,
                       const GirsanovWeights& weights, const MomentBound& bound) {
    std::ostringstream out;
    out << "beta = " << format_double(bound.beta) << '\n'
        << "D = " << format_double(estimate.norm) << '\n'
        << "argmax_node = " << estimate.argmax_node << '\n'
        << "clipped = " << estimate.clipped << '\n'
        << "r = " << format_double(exponents.r()) << '\n'
        << "log(r - 1) = " << format_double(exponents.log_r_excess) << '\n'
        << "q = " << format_double(exponents.q) << '\n'
        << "slack = " << format_double(exponents.slack) << '\n'
        << "weight_mean = " << format_double(weights.mean) << '\n'
        << "weight_mean_se = " << format_double(weights.mean_standard_error) << '\n'
        << "weight_variance = " << format_double(weights.variance) << '\n'
        << "weight_variance_se = " << format_double(weights.variance_standard_error) << '\n'
        << "moment_p = " << format_double(bound.p) << '\n'
        << "moment_lhs = " << format_double(bound.lhs) << '\n'
        << "moment_rhs = " << format_double(bound.rhs) << '\n'
        << "moment_ratio = " << format_double(bound.ratio) << '\n'
        << "moment_pass = " << (bound.pass ? "true" : "false") << '\n';
    return out.str();
}

}  // namespace bsdelab
