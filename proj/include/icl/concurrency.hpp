#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace icl {

// Paces backend calls when a requests-per-second budget is configured.
class TokenBucket {
public:
    TokenBucket(double rate_per_s, double burst)
        : rate_(rate_per_s), capacity_(std::max(1.0, burst)), tokens_(capacity_),
          last_(std::chrono::steady_clock::now()) {}

    void acquire() {
        if (rate_ <= 0.0) return;  // unlimited
        for (;;) {
            {
                std::lock_guard<std::mutex> lock(mutex_);
                refill();
                if (tokens_ >= 1.0) {
                    tokens_ -= 1.0;
                    return;
                }
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        }
    }

private:
    void refill() {
        auto now = std::chrono::steady_clock::now();
        double elapsed = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        tokens_ = std::min(capacity_, tokens_ + elapsed * rate_);
    }

    double rate_;
    double capacity_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
    std::mutex mutex_;
};

// Runs f(i) for i in [0, n) on up to `workers` threads. Callers index into
// pre-sized output slots, so results merge deterministically no matter which
// worker finishes first. The first exception wins and is rethrown.
template <typename F>
void parallel_for(size_t n, int workers, F&& f) {
    workers = static_cast<int>(std::min<size_t>(std::max(workers, 1), n));
    if (n == 0) return;
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) f(i);
        return;
    }

    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto worker = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                f(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(n);  // drain remaining work
                return;
            }
        }
    };

    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace icl
