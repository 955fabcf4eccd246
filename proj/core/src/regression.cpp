#include "bsdelab/regression.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bsdelab/error.hpp"
#include "bsdelab/parallel.hpp"

namespace bsdelab {
namespace {

// Enumerates exponent vectors of total degree `remaining` over variables [i, n).
void enumerate(std::size_t i, std::size_t n, unsigned remaining, std::vector<unsigned>& current,
               std::vector<unsigned>& out) {
    if (i + 1 == n) {
        current[i] = remaining;
        out.insert(out.end(), current.begin(), current.end());
        return;
    }
    for (unsigned e = remaining + 1; e-- > 0;) {
        current[i] = e;
        enumerate(i + 1, n, remaining - e, current, out);
    }
    current[i] = 0;
}

constexpr double kRidgeFactor = 1e-10;
constexpr double kMinReciprocalCondition = 1e-13;

}  // namespace

RegressionBasis::RegressionBasis(std::size_t dim, std::size_t degree)
    : dim_(dim), degree_(degree) {
    require(dim >= 1, ErrorCode::InvalidArgument, "basis dimension must be positive");
    std::vector<unsigned> current(dim, 0);
    for (unsigned total = 0; total <= degree; ++total) {
        enumerate(0, dim, total, current, exponents_);
    }
}

void RegressionBasis::features(std::span<const double> x, std::span<double> out) const {
    const std::size_t b = size();
    for (std::size_t m = 0; m < b; ++m) {
        double v = 1.0;
        for (std::size_t i = 0; i < dim_; ++i) {
            for (unsigned e = 0; e < exponents_[m * dim_ + i]; ++e) v *= x[i];
        }
        out[m] = v;
    }
}

Regressor::Regressor(std::span<const double> states, std::size_t paths,
                     const RegressionBasis& basis)
    : basis_(basis),
      paths_(paths),
      dim_(basis.dim()),
      basis_size_(basis.size()),
      centre_(dim_, 0.0),
      scale_(dim_, 1.0),
      degenerate_(dim_, false),
      standardized_(paths * dim_),
      design_(static_cast<Eigen::Index>(paths), static_cast<Eigen::Index>(basis.size())) {
    require(states.size() == paths * dim_, ErrorCode::ShapeMismatch,
            "state block does not match paths x basis dimension");
    if (paths <= basis_size_) {
        std::ostringstream msg;
        msg << "regression needs more paths (" << paths << ") than basis functions ("
            << basis_size_ << ")";
        fail(ErrorCode::InvalidArgument, msg.str());
    }

    // Two passes: E[x^2] - E[x]^2 would leave rounding noise for constant states.
    const double count = static_cast<double>(paths);
    const auto sums = blocked_sum(paths, dim_, [&](std::size_t p, double* acc) {
        for (std::size_t i = 0; i < dim_; ++i) acc[i] += states[p * dim_ + i];
    });
    for (std::size_t i = 0; i < dim_; ++i) centre_[i] = sums[i] / count;
    const auto squares = blocked_sum(paths, dim_, [&](std::size_t p, double* acc) {
        for (std::size_t i = 0; i < dim_; ++i) {
            const double v = states[p * dim_ + i] - centre_[i];
            acc[i] += v * v;
        }
    });
    for (std::size_t i = 0; i < dim_; ++i) {
        const double var = squares[i] / count;
        // Degenerate components (all paths equal) map to zero; the ridge
        // fallback then pins their coefficients at zero.
        degenerate_[i] = !(std::sqrt(var) > 1e-12 * (1.0 + std::abs(centre_[i])));
        scale_[i] = degenerate_[i] ? 1.0 : std::sqrt(var);
    }

    parallel_for(paths, [&](std::size_t begin, std::size_t end) {
        std::vector<double> phi(basis_size_);
        for (std::size_t p = begin; p < end; ++p) {
            for (std::size_t i = 0; i < dim_; ++i) {
                standardized_[p * dim_ + i] =
                    degenerate_[i] ? 0.0 : (states[p * dim_ + i] - centre_[i]) / scale_[i];
            }
            basis_.features(std::span<const double>(standardized_.data() + p * dim_, dim_), phi);
            for (std::size_t m = 0; m < basis_size_; ++m) {
                design_(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(m)) = phi[m];
            }
        }
    });

    const std::size_t b = basis_size_;
    const auto gram_flat = blocked_sum(paths, b * b, [&](std::size_t p, double* acc) {
        const auto row = design_.row(static_cast<Eigen::Index>(p));
        for (std::size_t r = 0; r < b; ++r) {
            const double vr = row(static_cast<Eigen::Index>(r));
            for (std::size_t c = r; c < b; ++c) acc[r * b + c] += vr * row(static_cast<Eigen::Index>(c));
        }
    });
    Eigen::MatrixXd gram(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(b));
    for (std::size_t r = 0; r < b; ++r) {
        for (std::size_t c = r; c < b; ++c) {
            gram(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = gram_flat[r * b + c];
            gram(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)) = gram_flat[r * b + c];
        }
    }

    factor_.compute(gram);
    if (factor_.info() != Eigen::Success || !(factor_.rcond() > kMinReciprocalCondition)) {
        used_ridge_ = true;
        const double lambda = kRidgeFactor * gram.trace() / static_cast<double>(b);
        gram.diagonal().array() += lambda;
        factor_.compute(gram);
        if (factor_.info() != Eigen::Success || !std::isfinite(factor_.rcond()) ||
            !(lambda > 0.0)) {
            fail(ErrorCode::SingularBasis, "normal equations singular after ridge fallback");
        }
    }
}

Eigen::VectorXd Regressor::coefficients(std::span<const double> targets) const {
    require(targets.size() == paths_, ErrorCode::ShapeMismatch,
            "target count does not match the design");
    const std::size_t b = basis_size_;
    const auto rhs_flat = blocked_sum(paths_, b, [&](std::size_t p, double* acc) {
        const double y = targets[p];
        const auto row = design_.row(static_cast<Eigen::Index>(p));
        for (std::size_t m = 0; m < b; ++m) acc[m] += row(static_cast<Eigen::Index>(m)) * y;
    });
    Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(rhs_flat.data(),
                                                            static_cast<Eigen::Index>(b));
    Eigen::VectorXd beta = factor_.solve(rhs);
    if (!beta.allFinite()) fail(ErrorCode::SingularBasis, "regression produced non-finite coefficients");
    return beta;
}

void Regressor::fitted(const Eigen::VectorXd& coefficients, std::span<double> out) const {
    parallel_for(paths_, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            out[p] = design_.row(static_cast<Eigen::Index>(p)).dot(coefficients);
        }
    });
}

std::vector<double> Regressor::fit(std::span<const double> targets) const {
    std::vector<double> out(paths_);
    fitted(coefficients(targets), out);
    return out;
}

double Regressor::leverage(std::size_t path) const {
    const Eigen::VectorXd phi = design_.row(static_cast<Eigen::Index>(path)).transpose();
    return phi.dot(factor_.solve(phi));
}

void Regressor::standardize(std::span<const double> state, std::span<double> out) const {
    for (std::size_t i = 0; i < dim_; ++i) {
        out[i] = degenerate_[i] ? 0.0 : (state[i] - centre_[i]) / scale_[i];
    }
}

double Regressor::surface_value_at(const Eigen::VectorXd& coefficients,
                                   std::span<const double> state) const {
    std::vector<double> s(dim_), phi(basis_size_);
    standardize(state, s);
    basis_.features(s, phi);
    double v = 0.0;
    for (std::size_t m = 0; m < basis_size_; ++m) v += coefficients(static_cast<Eigen::Index>(m)) * phi[m];
    return v;
}

void Regressor::surface_gradient_at(const Eigen::VectorXd& coefficients,
                                    std::span<const double> state, std::span<double> out) const {
    std::vector<double> s(dim_);
    standardize(state, s);
    for (std::size_t i = 0; i < dim_; ++i) {
        if (degenerate_[i]) {
            out[i] = 0.0;
            continue;
        }
        double g = 0.0;
        for (std::size_t m = 0; m < basis_size_; ++m) {
            const unsigned e = basis_.exponent(m, i);
            if (e == 0) continue;
            double term = static_cast<double>(e);
            for (std::size_t v = 0; v < dim_; ++v) {
                const unsigned power = basis_.exponent(m, v) - (v == i ? 1u : 0u);
                for (unsigned q = 0; q < power; ++q) term *= s[v];
            }
            g += coefficients(static_cast<Eigen::Index>(m)) * term;
        }
        out[i] = g / scale_[i];
    }
}

std::vector<double> condexp_regress(std::span<const double> targets,
                                    std::span<const double> states,
                                    const RegressionBasis& basis) {
    const std::size_t paths = targets.size();
    return Regressor(states, paths, basis).fit(targets);
}

}  // namespace bsdelab
