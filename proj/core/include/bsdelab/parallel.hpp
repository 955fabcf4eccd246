#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace bsdelab {

// Process-wide worker count. Defaults to BSDELAB_WORKERS when set, otherwise
// the hardware concurrency. Results never depend on this value.
std::size_t worker_count() noexcept;
void set_worker_count(std::size_t workers) noexcept;

class ScopedWorkerCount {
public:
    explicit ScopedWorkerCount(std::size_t workers) : previous_(worker_count()) {
        set_worker_count(workers);
    }
    ~ScopedWorkerCount() { set_worker_count(previous_); }
    ScopedWorkerCount(const ScopedWorkerCount&) = delete;
    ScopedWorkerCount& operator=(const ScopedWorkerCount&) = delete;

private:
    std::size_t previous_;
};

/// Runs body(begin, end) over a partition of [0, count). Each index is
/// visited exactly once; the first exception thrown by any chunk is rethrown.
/// `min_chunk` is the smallest number of indices worth a thread of its own.
void parallel_for(std::size_t count,
                  const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t min_chunk = 512);

/// Reduction block size. Partial results are formed per fixed block and
/// combined in block order, so sums are bit-identical for any worker count.
inline constexpr std::size_t kReductionBlock = 2048;

/// Sum of `width` accumulators over [0, count): term(i, acc) adds the
/// contribution of index i into acc[0..width).
std::vector<double> blocked_sum(
    std::size_t count, std::size_t width,
    const std::function<void(std::size_t, double*)>& term);

}  // namespace bsdelab
