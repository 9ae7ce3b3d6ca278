#include "parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace slimdet {

namespace {

int default_threads() {
    if (const char* env = std::getenv("SLIMDET_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

std::atomic<int> g_threads{0};  // 0 = not yet initialized

}  // namespace

void set_thread_count(int n) { g_threads.store(n < 1 ? 1 : n); }

int thread_count() {
    int n = g_threads.load();
    if (n == 0) {
        n = default_threads();
        g_threads.store(n);
    }
    return n;
}

void parallel_for(size_t n, const std::function<void(size_t)>& fn) {
    if (n == 0) return;
    size_t workers = static_cast<size_t>(thread_count());
    if (workers > n) workers = n;
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    size_t chunk = (n + workers - 1) / workers;
    for (size_t w = 0; w < workers; ++w) {
        size_t lo = w * chunk;
        size_t hi = lo + chunk < n ? lo + chunk : n;
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace slimdet
