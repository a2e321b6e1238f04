#pragma once

#include <atomic>
#include <thread>
#include <vector>

namespace canvass::detail {

/// Index-parallel loop over [0, count). Work items must be independent;
/// results keyed by index stay deterministic regardless of thread count.
template <typename F>
void parallel_for(int count, int threads, F&& f) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
    if (threads == 1 || count <= 1) {
        for (int i = 0; i < count; ++i) f(i);
        return;
    }
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= count) return;
            f(i);
        }
    };
    std::vector<std::thread> pool;
    const int spawn = std::min(threads, count);
    pool.reserve(spawn - 1);
    for (int t = 1; t < spawn; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
}

}  // namespace canvass::detail
