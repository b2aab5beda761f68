#include "dtstop/parallel.hpp"

#include <algorithm>
#include <atomic>

namespace dtstop {

namespace {
std::atomic<int> g_threads{1};
}

int thread_count() noexcept { return g_threads.load(); }

void set_thread_count(int threads) noexcept { g_threads.store(std::max(1, threads)); }

}  // namespace dtstop
