#include "bsdelab/truncation.hpp"

#include <cmath>
#include <string>

#include "bsdelab/error.hpp"

namespace bsdelab {
namespace {

double norm(std::span<const double> z) noexcept {
    double s = 0.0;
    for (double v : z) s += v * v;
    return std::sqrt(s);
}

}  // namespace

Truncation::Truncation(double level) : level_(level) {
    require(level > 0.0 && !std::isnan(level), ErrorCode::InvalidArgument,
            "truncation level must be positive, got " + std::to_string(level));
    if (std::isinf(level)) level_.reset();
}

double Truncation::value(double radius) const noexcept {
    const double r = std::abs(radius);
    if (!level_ || r <= *level_) return r * r;
    return 2.0 * *level_ * r - *level_ * *level_;
}

double Truncation::value(std::span<const double> z) const noexcept {
    return value(norm(z));
}

double Truncation::derivative(double r) const noexcept {
    if (!level_ || std::abs(r) <= *level_) return 2.0 * r;
    return r > 0.0 ? 2.0 * *level_ : -2.0 * *level_;
}

void Truncation::gradient(std::span<const double> z, std::span<double> out) const noexcept {
    const double r = norm(z);
    const double scale = (!level_ || r <= *level_) ? 2.0 : 2.0 * *level_ / r;
    for (std::size_t j = 0; j < z.size(); ++j) out[j] = scale * z[j];
}

void Truncation::ratio(std::span<const double> z, std::span<double> out) const noexcept {
    const double r = norm(z);
    const double scale = r == 0.0 ? 0.0 : value(r) / (r * r);
    for (std::size_t j = 0; j < z.size(); ++j) out[j] = scale * z[j];
}

}  // namespace bsdelab
