#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace bsdelab {

/// Monomials of total degree <= p in n variables, constant first.
class RegressionBasis {
public:
    RegressionBasis(std::size_t dim, std::size_t degree);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t degree() const noexcept { return degree_; }
    /// B = C(n + p, p).
    std::size_t size() const noexcept { return exponents_.size() / (dim_ == 0 ? 1 : dim_); }
    /// Exponent of variable i in monomial m.
    unsigned exponent(std::size_t m, std::size_t i) const noexcept {
        return exponents_[m * dim_ + i];
    }

    /// phi(x) written into out (length size()).
    void features(std::span<const double> x, std::span<double> out) const;

private:
    std::size_t dim_;
    std::size_t degree_;
    std::vector<unsigned> exponents_;
};

/// Least-squares projection onto span{phi(X_k)} for a fixed design.
///
/// The design is factorised once; every target regressed at the same node
/// reuses it. States are centred and scaled per component before the
/// monomials are formed, which leaves the spanned space unchanged. The normal
/// matrix is assembled with a fixed-order blocked reduction.
class Regressor {
public:
    /// states: paths x n row-major.
    Regressor(std::span<const double> states, std::size_t paths, const RegressionBasis& basis);

    std::size_t paths() const noexcept { return paths_; }
    std::size_t basis_size() const noexcept { return basis_size_; }
    bool used_ridge() const noexcept { return used_ridge_; }

    Eigen::VectorXd coefficients(std::span<const double> targets) const;
    void fitted(const Eigen::VectorXd& coefficients, std::span<double> out) const;
    std::vector<double> fit(std::span<const double> targets) const;

    /// phi_p^T (Phi^T Phi)^{-1} phi_p; prediction variance is s^2 times this.
    double leverage(std::size_t path) const;

    /// Whether every path shares the same value of state component i.
    bool degenerate(std::size_t i) const noexcept { return degenerate_[i]; }

    /// Fitted surface and its gradient (original coordinates) at any state.
    /// Degenerate components contribute a zero derivative.
    double surface_value_at(const Eigen::VectorXd& coefficients,
                            std::span<const double> state) const;
    void surface_gradient_at(const Eigen::VectorXd& coefficients, std::span<const double> state,
                             std::span<double> out) const;

private:
    void standardize(std::span<const double> state, std::span<double> out) const;

    RegressionBasis basis_;
    std::size_t paths_;
    std::size_t dim_;
    std::size_t basis_size_;
    std::vector<double> centre_;
    std::vector<double> scale_;
    std::vector<bool> degenerate_;
    std::vector<double> standardized_;  // paths x n
    Eigen::MatrixXd design_;            // paths x B
    Eigen::LLT<Eigen::MatrixXd> factor_;
    bool used_ridge_ = false;
};

/// Fitted conditional expectation of targets given the states, one value per path.
/// Throws SingularBasis when even the ridge-regularised system cannot be factorised.
std::vector<double> condexp_regress(std::span<const double> targets,
                                    std::span<const double> states,
                                    const RegressionBasis& basis);

}  // namespace bsdelab
