#include "bsdelab/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

namespace bsdelab {
namespace {

std::size_t initial_workers() {
    if (const char* env = std::getenv("BSDELAB_WORKERS")) {
        try {
            const long value = std::stol(env);
            if (value > 0) return static_cast<std::size_t>(value);
        } catch (...) {
        }
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

std::atomic<std::size_t>& workers_setting() {
    static std::atomic<std::size_t> workers{initial_workers()};
    return workers;
}

}  // namespace

std::size_t worker_count() noexcept { return workers_setting().load(); }

void set_worker_count(std::size_t workers) noexcept {
    workers_setting().store(std::max<std::size_t>(1, workers));
}

void parallel_for(std::size_t count,
                  const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t min_chunk) {
    if (count == 0) return;
    const std::size_t workers = std::min(
        worker_count(), std::max<std::size_t>(1, count / std::max<std::size_t>(1, min_chunk)));
    if (workers <= 1) {
        body(0, count);
        return;
    }

    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    const std::size_t chunk = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(count, begin + chunk);
        if (begin >= end) break;
        threads.emplace_back([&, begin, end] {
            try {
                body(begin, end);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::vector<double> blocked_sum(
    std::size_t count, std::size_t width,
    const std::function<void(std::size_t, double*)>& term) {
    const std::size_t blocks = (count + kReductionBlock - 1) / kReductionBlock;
    std::vector<double> partial(blocks * width, 0.0);
    parallel_for(blocks, [&](std::size_t b0, std::size_t b1) {
        for (std::size_t b = b0; b < b1; ++b) {
            double* acc = partial.data() + b * width;
            const std::size_t end = std::min(count, (b + 1) * kReductionBlock);
            for (std::size_t i = b * kReductionBlock; i < end; ++i) term(i, acc);
        }
    }, 1);
    std::vector<double> total(width, 0.0);
    for (std::size_t b = 0; b < blocks; ++b) {
        for (std::size_t j = 0; j < width; ++j) total[j] += partial[b * width + j];
    }
    return total;
}

}  // namespace bsdelab
