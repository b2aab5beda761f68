#pragma once

#include <cstddef>
#include <exception>
#include <limits>
#include <mutex>

namespace dtstop {

/// Worker count used by every parallel loop in the library (default 1).
int thread_count() noexcept;
void set_thread_count(int threads) noexcept;

/// Runs body(i) for i in [0, n). Work is split statically; bodies must only
/// write to slots owned by their index so results do not depend on the
/// thread count. The exception thrown by the lowest failing index is rethrown.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
    std::exception_ptr failure;
    std::size_t failed_at = std::numeric_limits<std::size_t>::max();
    std::mutex guard;
    const long count = static_cast<long>(n);
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (long i = 0; i < count; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
            std::lock_guard lock(guard);
            if (static_cast<std::size_t>(i) < failed_at) {
                failed_at = static_cast<std::size_t>(i);
                failure = std::current_exception();
            }
        }
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace dtstop
