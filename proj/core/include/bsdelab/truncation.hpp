#pragma once

#include <limits>
#include <optional>
#include <span>

namespace bsdelab {

/// Radial truncation of the quadratic term |z|^2.
///
/// With level n, g_n(z) = |z|^2 for |z| <= n and 2n|z| - n^2 beyond, so g_n is
/// globally Lipschitz, |g_n(z)| <= |z|^2 and g_n -> |z|^2 locally uniformly.
/// An unset level means no truncation.
class Truncation {
public:
    Truncation() = default;
    explicit Truncation(double level);

    static Truncation unbounded() { return {}; }

    bool bounded() const noexcept { return level_.has_value(); }
    double level() const noexcept {
        return level_.value_or(std::numeric_limits<double>::infinity());
    }

    /// g_n(|z|).
    double value(std::span<const double> z) const noexcept;
    double value(double radius) const noexcept;

    /// Scalar derivative g'_n(r) of the radial profile, r = |z| >= 0 or signed in 1-D.
    double derivative(double r) const noexcept;

    /// Gradient of z -> g_n(|z|): 2z inside the ball, 2n z/|z| outside.
    void gradient(std::span<const double> z, std::span<double> out) const noexcept;

    /// h_n(z) = g_n(|z|) z / |z|^2, with h_n(0) = 0; in 1-D this is g_n(z)/z.
    void ratio(std::span<const double> z, std::span<double> out) const noexcept;

    friend bool operator==(const Truncation&, const Truncation&) = default;

private:
    std::optional<double> level_;
};

}  // namespace bsdelab
