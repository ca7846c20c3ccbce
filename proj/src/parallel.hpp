#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace forge {

/// Runs fn(i) for i in [0, n) on up to `workers` threads (strided). fn must
/// only write state owned by index i.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
    const auto w = static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(workers, n)));
    if (w <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::jthread> pool;
    for (unsigned k = 0; k < w; ++k)
        pool.emplace_back([&fn, k, w, n] {
            for (std::size_t i = k; i < n; i += w) fn(i);
        });
}

} // namespace forge
