// parallel.hpp
//
// Bounded worker pool for independent jobs. Results land in caller-owned slots
// indexed by job, so output order never depends on completion order.

#ifndef ROBOFP_PARALLEL_HPP
#define ROBOFP_PARALLEL_HPP

#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace robofp {

/// Worker count from ROBOFP_WORKERS, else the hardware concurrency.
inline std::size_t worker_count() {
    if (const char *env = std::getenv("ROBOFP_WORKERS")) {
        try {
            const long n = std::stol(env);
            if (n >= 1) {
                return static_cast<std::size_t>(n);
            }
        } catch (const std::exception &) {
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

/// Runs fn(i) for i in [0, n). The first exception thrown by any job is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, Fn &&fn, std::size_t workers = worker_count()) {
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock{error_mutex};
                if (!error) {
                    error = std::current_exception();
                }
                next = n;
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back(work);
    }
    pool.clear();
    if (error) {
        std::rethrow_exception(error);
    }
}

} // namespace robofp

#endif // ROBOFP_PARALLEL_HPP
