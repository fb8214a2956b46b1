#include "core/threading.hpp"

#include <cstdlib>
#include <thread>
#include <vector>

namespace mvb {

int max_threads() {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (const char* env = std::getenv("MVB_THREADS")) {
        int cap = std::atoi(env);
        if (cap >= 1 && cap < hw) hw = cap;
    }
    return hw;
}

void parallel_for(int n, const std::function<void(int, int)>& fn) {
    if (n <= 0) return;
    int workers = max_threads();
    if (workers > n) workers = n;
    if (workers == 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    int chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; w++) {
        int begin = w * chunk;
        int end = begin + chunk < n ? begin + chunk : n;
        if (begin >= end) break;
        pool.emplace_back(fn, begin, end);
    }
    for (auto& t : pool) t.join();
}

}  // namespace mvb
