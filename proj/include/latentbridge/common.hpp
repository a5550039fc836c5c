#pragma once

#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace lb {

// Error taxonomy. Exit-code mapping lives in the CLI: usage 2, data 3, numeric 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct DataError : Error {
    using Error::Error;
};
struct CheckpointError : Error {
    using Error::Error;
};
struct NumericError : Error {
    using Error::Error;
};

namespace detail {
inline int& thread_cap_ref() {
    static int cap = 0;  // 0 = uninitialized
    return cap;
}
}  // namespace detail

// Worker-thread cap. Defaults to hardware_concurrency, bounded by the
// LATENTBRIDGE_THREADS environment variable when set.
inline int thread_cap() {
    int& cap = detail::thread_cap_ref();
    if (cap == 0) {
        unsigned hw = std::thread::hardware_concurrency();
        int n = hw == 0 ? 1 : static_cast<int>(hw);
        if (const char* env = std::getenv("LATENTBRIDGE_THREADS")) {
            int limit = std::atoi(env);
            if (limit >= 1 && limit < n) n = limit;
        }
        cap = n;
    }
    return cap;
}

inline void set_thread_cap(int n) {
    detail::thread_cap_ref() = n < 1 ? 1 : n;
}

// Runs fn(i) for i in [0, n). Work is split into contiguous chunks; every
// index is processed by exactly one worker, so writes to per-index outputs
// stay race-free and results do not depend on the thread count.
template <typename Fn>
void parallel_for(int64_t n, Fn&& fn) {
    int workers = thread_cap();
    if (n <= 1 || workers <= 1) {
        for (int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    if (workers > n) workers = static_cast<int>(n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    int64_t chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        int64_t lo = w * chunk;
        int64_t hi = lo + chunk < n ? lo + chunk : n;
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (int64_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace lb
