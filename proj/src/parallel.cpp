#include "isaacs/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace isaacs {

namespace {
std::atomic<unsigned> g_max_threads{0};
}

void set_max_threads(unsigned n) { g_max_threads.store(n); }

unsigned max_threads() {
    unsigned cap = g_max_threads.load();
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    return cap == 0 ? hw : std::min(cap, hw);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn,
                  std::size_t min_grain) {
    if (n == 0) return;
    std::size_t workers = max_threads();
    if (workers <= 1 || n < 2 * min_grain) {
        fn(0, n);
        return;
    }
    workers = std::min<std::size_t>(workers, (n + min_grain - 1) / min_grain);

    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    std::exception_ptr first_error;
    std::atomic<bool> failed{false};

    auto run = [&](std::size_t w) {
        std::size_t begin = n * w / workers;
        std::size_t end = n * (w + 1) / workers;
        try {
            fn(begin, end);
        } catch (...) {
            if (!failed.exchange(true)) first_error = std::current_exception();
        }
    };

    for (std::size_t w = 1; w < workers; ++w)
        pool.emplace_back(run, w);
    run(0);
    for (auto& th : pool) th.join();

    if (failed.load()) std::rethrow_exception(first_error);
}

} // namespace isaacs
