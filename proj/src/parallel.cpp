#include "uscnn/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace uscnn {

int worker_thread_count() {
    static const int cached = [] {
        int n = static_cast<int>(std::thread::hardware_concurrency());
        if (n < 1) n = 1;
        if (const char* env = std::getenv("USCNN_THREADS")) {
            char* end = nullptr;
            long v = std::strtol(env, &end, 10);
            if (end != env && v >= 1) n = static_cast<int>(std::min<long>(v, 256));
        }
        return n;
    }();
    return cached;
}

void parallel_for(int count, const std::function<void(int)>& fn) {
    const int threads = std::min(worker_thread_count(), count);
    if (threads <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads) - 1);
    // Contiguous ranges; range r covers [r*count/threads, (r+1)*count/threads).
    auto run_range = [&](int r) {
        const int lo = static_cast<int>(static_cast<long long>(r) * count / threads);
        const int hi = static_cast<int>(static_cast<long long>(r + 1) * count / threads);
        for (int i = lo; i < hi; ++i) fn(i);
    };
    for (int r = 1; r < threads; ++r) {
        pool.emplace_back(run_range, r);
    }
    run_range(0);
    for (auto& t : pool) t.join();
}

}  // namespace uscnn
