#include "feast/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace feast {

int worker_count() {
    if (const char* env = std::getenv("FEAST_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1 && v <= 1024) return static_cast<int>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(int n, const std::function<void(int, int)>& fn) {
    if (n < 256) {
        if (n > 0) fn(0, n);
        return;
    }
    const int workers = std::min(worker_count(), n);
    if (workers <= 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(workers - 1);
    const int chunk = (n + workers - 1) / workers;
    for (int t = 1; t < workers; ++t) {
        const int begin = t * chunk;
        const int end = std::min(n, begin + chunk);
        if (begin < end) threads.emplace_back(fn, begin, end);
    }
    fn(0, std::min(n, chunk));
    for (std::thread& th : threads) th.join();
}

} // namespace feast
