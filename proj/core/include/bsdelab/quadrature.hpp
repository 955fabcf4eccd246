#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace bsdelab {

/// Quadrature rule for E[f(G)], G ~ N(0, 1): weights sum to 1.
struct NormalRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
NormalRule gauss_hermite(std::size_t order);

/// Trapezoid on [-width, width] against the normal density. Converges
/// geometrically in 1 / step for integrands analytic in a strip, which
/// Gauss-Hermite only manages like exp(-c sqrt(order)) when poles are near.
NormalRule normal_trapezoid(double step, double width);

/// E[f(mean + sd * G)] with the given rule.
double normal_expectation(const NormalRule& rule, double mean, double sd,
                          const std::function<double(double)>& f);

}  // namespace bsdelab
