#include "anycam/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace anycam {

int worker_count() {
    static const int cached = [] {
        int n = static_cast<int>(std::thread::hardware_concurrency());
        if (n <= 0)
            n = 1;
        if (const char *env = std::getenv("ANYCAM_THREADS")) {
            char *end = nullptr;
            long cap = std::strtol(env, &end, 10);
            if (end != env && cap >= 1)
                n = std::min<long>(n, cap);
        }
        return n;
    }();
    return cached;
}

void parallel_blocks(std::size_t n, std::size_t blocks,
                     const std::function<void(std::size_t, std::size_t, std::size_t)> &fn) {
    if (n == 0)
        return;
    blocks = std::max<std::size_t>(1, std::min(blocks, n));
    const std::size_t chunk = (n + blocks - 1) / blocks;

    auto run_block = [&](std::size_t b) {
        const std::size_t begin = b * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin < end)
            fn(b, begin, end);
    };

    const int workers = std::min<int>(worker_count(), static_cast<int>(blocks));
    if (workers <= 1) {
        for (std::size_t b = 0; b < blocks; ++b)
            run_block(b);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            try {
                for (;;) {
                    const std::size_t b = next.fetch_add(1);
                    if (b >= blocks)
                        return;
                    run_block(b);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error)
                    error = std::current_exception();
            }
        });
    }
    for (auto &t : pool)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

void parallel_for_each(std::size_t n, const std::function<void(std::size_t)> &fn) {
    parallel_blocks(n, n, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            fn(i);
    });
}

double parallel_sum(std::size_t n, const std::function<double(std::size_t)> &term) {
    if (n == 0)
        return 0.0;
    const std::size_t blocks = std::min<std::size_t>(n, 64);
    std::vector<double> partial(blocks, 0.0);
    parallel_blocks(n, blocks, [&](std::size_t b, std::size_t begin, std::size_t end) {
        double acc = 0.0;
        for (std::size_t i = begin; i < end; ++i)
            acc += term(i);
        partial[b] = acc;
    });
    double total = 0.0;
    for (double p : partial)
        total += p;
    return total;
}

} // namespace anycam
