#include "voldose/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace voldose {

namespace {
std::atomic<int> g_threads{1};
}

void set_thread_count(int n) {
    g_threads.store(std::max(1, n));
}

int thread_count() {
    return g_threads.load();
}

void parallel_for_chunks(std::int64_t n,
                         const std::function<void(std::int64_t, std::int64_t)>& fn) {
    if (n <= 0) return;
    const int workers = static_cast<int>(std::min<std::int64_t>(thread_count(), n));
    if (workers <= 1) {
        fn(0, n);
        return;
    }
    const std::int64_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        const std::int64_t b = w * chunk;
        const std::int64_t e = std::min<std::int64_t>(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    for (auto& t : pool) t.join();
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
    parallel_for_chunks(n, [&fn](std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i) fn(i);
    });
}

} // namespace voldose
