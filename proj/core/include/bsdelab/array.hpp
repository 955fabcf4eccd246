#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

namespace bsdelab {

/// Dense row-major array of doubles with a fixed rank.
///
/// Monte Carlo bundles are stored path-major: the leading index is always
/// the path, so `slice(p)` yields everything that belongs to one path.
template <std::size_t Rank>
class Array {
    static_assert(Rank >= 1);

public:
    using Shape = std::array<std::size_t, Rank>;

    Array() { shape_.fill(0); strides_.fill(0); }

    explicit Array(const Shape& shape, double fill = 0.0) : shape_(shape) {
        std::size_t stride = 1;
        for (std::size_t r = Rank; r-- > 0;) {
            strides_[r] = stride;
            stride *= shape_[r];
        }
        data_.assign(stride, fill);
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t extent(std::size_t r) const noexcept { return shape_[r]; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    template <typename... Idx>
    double& operator()(Idx... idx) noexcept {
        static_assert(sizeof...(Idx) == Rank);
        return data_[offset({static_cast<std::size_t>(idx)...})];
    }

    template <typename... Idx>
    double operator()(Idx... idx) const noexcept {
        static_assert(sizeof...(Idx) == Rank);
        return data_[offset({static_cast<std::size_t>(idx)...})];
    }

    /// Contiguous trailing block addressed by a prefix of indices.
    template <typename... Idx>
    std::span<double> slice(Idx... idx) noexcept {
        static_assert(sizeof...(Idx) < Rank);
        constexpr std::size_t k = sizeof...(Idx);
        const std::array<std::size_t, k> prefix{static_cast<std::size_t>(idx)...};
        std::size_t off = 0;
        for (std::size_t r = 0; r < k; ++r) off += prefix[r] * strides_[r];
        if constexpr (k == 0) {
            return {data_.data(), data_.size()};
        } else {
            return {data_.data() + off, strides_[k - 1]};
        }
    }

    template <typename... Idx>
    std::span<const double> slice(Idx... idx) const noexcept {
        return const_cast<Array*>(this)->slice(idx...);
    }

    std::span<double> flat() noexcept { return data_; }
    std::span<const double> flat() const noexcept { return data_; }

    void fill(double value) { std::fill(data_.begin(), data_.end(), value); }

    friend bool operator==(const Array&, const Array&) = default;

private:
    std::size_t offset(const std::array<std::size_t, Rank>& idx) const noexcept {
        std::size_t off = 0;
        for (std::size_t r = 0; r < Rank; ++r) {
            assert(idx[r] < shape_[r]);
            off += idx[r] * strides_[r];
        }
        return off;
    }

    Shape shape_;
    Shape strides_;
    std::vector<double> data_;
};

using Array1 = Array<1>;
using Array2 = Array<2>;
using Array3 = Array<3>;
using Array4 = Array<4>;

}  // namespace bsdelab
