#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace rmlab {

/// Deterministic static-partition parallel loop: results must be written to
/// index-addressed slots so the outcome is independent of thread count.
inline void parallel_for(size_t n, const std::function<void(size_t)>& body,
                         unsigned max_threads = 0) {
    if (n == 0) return;
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (max_threads) hw = std::min(hw, max_threads);
    const unsigned nt = unsigned(std::min<size_t>(hw, n));
    if (nt <= 1) {
        for (size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> ts;
    ts.reserve(nt);
    const size_t chunk = (n + nt - 1) / nt;
    for (unsigned t = 0; t < nt; ++t) {
        const size_t lo = size_t(t) * chunk;
        const size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        ts.emplace_back([&body, lo, hi] {
            for (size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& t : ts) t.join();
}

}  // namespace rmlab
