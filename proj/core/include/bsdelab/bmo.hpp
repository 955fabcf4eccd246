#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bsdelab/array.hpp"
#include "bsdelab/bsde.hpp"
#include "bsdelab/forward.hpp"
#include "bsdelab/regression.hpp"

namespace bsdelab {

/// Reverse-Hölder threshold Ψ(x) = sqrt(1 + log((2x - 1)/(2(x - 1))) / x^2) - 1, x > 1.
/// Throws DomainError for x <= 1.
double psi(double x);

/// Ψ(1 + excess), accurate for excesses far below machine epsilon.
double psi_excess(double excess);

/// Ψ(1 + exp(log_excess)). Finite for any finite log_excess, so thresholds
/// beyond what a double excess can reach stay attainable.
double psi_log_excess(double log_excess);

struct HolderExponents {
    /// log(r - 1). r - 1 itself underflows to 0 once 2 alpha D exceeds about 26.
    double log_r_excess = 0.0;
    double r_excess = 0.0;  // exp(log_r_excess), possibly 0
    double q = 0.0;         // r / (r - 1), possibly inf
    double slack = 0.0;     // Ψ(r) - 2 alpha D, always > 0

    double r() const noexcept { return 1.0 + r_excess; }
};

/// Largest r <= r_cap with Ψ(r) > 2 alpha D, by bisection on log(r - 1) to 1e-8.
/// Never fails for finite inputs: large thresholds give r near 1 and small slack.
HolderExponents find_r(double alpha, double bmo_norm, double r_cap);

struct BmoEstimate {
    double norm = 0.0;  // D
    /// Regressed E[int_{t_k}^T |Z|^2 ds | F_k] per [path][node], negatives clipped.
    Array2 tail_energy;
    std::size_t argmax_node = 0;
    std::size_t clipped = 0;
    double min_raw = 0.0;  // most negative regressed energy before clipping
};

/// D = max over nodes of the 99.9th percentile over paths of sqrt(e_k).
/// `z` is [path][node][d] as in BsdeSolution; the last node is not integrated.
BmoEstimate estimate_bmo2(const Array3& z, const PathSet& paths, const RegressionBasis& basis);

struct GirsanovWeights {
    std::vector<double> weights;
    double mean = 0.0;
    double mean_standard_error = 0.0;
    double variance = 0.0;
    double variance_standard_error = 0.0;
};

/// w_p = exp(sum_k H_k . dW_k - 0.5 sum_k |H_k|^2 dt) over k < N.
/// Throws OverflowInExponent when an exponent exceeds 700 in magnitude.
GirsanovWeights girsanov_weights(const Array3& h, const PathSet& paths);

struct MomentBound {
    double p = 1.0;
    double q = 0.0;
    double beta = 0.0;  // M^2 + 2M
    double lhs = 0.0;   // E sup|U|^{2p} + E (int |V|^2)^p
    double rhs = 0.0;   // E[|zeta|^{2pq^2} + (int |A|)^{2pq^2}]^{1/q^2}
    double ratio = 0.0;
    bool pass = false;
};

/// Sample sides of the moment estimate for a linear BSDE solution (U, V) with
/// terminal `zeta` and free term A ([path][node], empty for A = 0).
MomentBound moment_bound_diagnostic(const BsdeSolution& solution, std::span<const double> zeta,
                                    const Array2& a, const TimeGrid& grid,
                                    const HolderExponents& exponents, double p,
                                    double lipschitz_const);

std::string bmo_report(const BmoEstimate& estimate, const HolderExponents& exponents,
                       const GirsanovWeights& weights, const MomentBound& bound);

}  // namespace bsdelab
