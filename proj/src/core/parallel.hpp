#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace chirascope {

/// Worker count: `requested` if nonzero, else CHIRASCOPE_THREADS if set and
/// nonzero, else the hardware concurrency.
unsigned resolve_threads(unsigned requested);

/// Runs fn(0) .. fn(count - 1) over up to `threads` workers. If any call
/// throws, the exception of the lowest failing index is rethrown once all
/// workers finish, so the reported error does not depend on scheduling.
inline void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const auto n = std::min<std::size_t>(resolve_threads(threads), count);
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace chirascope
