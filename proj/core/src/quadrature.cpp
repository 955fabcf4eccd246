#include "bsdelab/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>

#include "bsdelab/error.hpp"

namespace bsdelab {

NormalRule gauss_hermite(std::size_t order) {
    require(order >= 1, ErrorCode::InvalidArgument, "quadrature order must be positive");
    const auto n = static_cast<Eigen::Index>(order);
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 1; k < n; ++k) {
        jacobi(k, k - 1) = std::sqrt(static_cast<double>(k));
        jacobi(k - 1, k) = jacobi(k, k - 1);
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
    require(solver.info() == Eigen::Success, ErrorCode::DomainError,
            "eigen decomposition of the Jacobi matrix failed");
    NormalRule rule;
    rule.nodes.resize(order);
    rule.weights.resize(order);
    for (Eigen::Index i = 0; i < n; ++i) {
        rule.nodes[static_cast<std::size_t>(i)] = solver.eigenvalues()(i);
        const double v = solver.eigenvectors()(0, i);
        rule.weights[static_cast<std::size_t>(i)] = v * v;
    }
    return rule;
}

NormalRule normal_trapezoid(double step, double width) {
    require(step > 0.0 && width > 0.0 && std::isfinite(width), ErrorCode::InvalidArgument,
            "trapezoid step and width must be positive");
    const auto half = static_cast<std::size_t>(std::ceil(width / step));
    NormalRule rule;
    const double norm = step / std::sqrt(2.0 * std::numbers::pi);
    for (std::size_t i = 0; i <= 2 * half; ++i) {
        const double g = (static_cast<double>(i) - static_cast<double>(half)) * step;
        rule.nodes.push_back(g);
        rule.weights.push_back(norm * std::exp(-0.5 * g * g));
    }
    return rule;
}

double normal_expectation(const NormalRule& rule, double mean, double sd,
                          const std::function<double(double)>& f) {
    double total = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        total += rule.weights[i] * f(mean + sd * rule.nodes[i]);
    }
    return total;
}

}  // namespace bsdelab
