#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace icepath {

inline unsigned resolve_threads(unsigned requested) {
    if (requested != 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Run body(i) for i in [0, count) on up to `threads` workers. Work items are
/// claimed dynamically; callers must write results by index so the outcome
/// does not depend on scheduling. The first exception is rethrown.
template <typename Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
    threads = std::min<unsigned>(resolve_threads(threads), static_cast<unsigned>(std::max<std::size_t>(count, 1)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    pool.clear();
    if (error) std::rethrow_exception(error);
}

/// Count, mean and sum of squared deviations; merges are exact in a fixed
/// order so chunked reductions are reproducible.
struct Moments {
    std::size_t n = 0;
    double mean = 0;
    double m2 = 0;

    void add(double x) {
        ++n;
        const double delta = x - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (x - mean);
    }

    void merge(const Moments& o) {
        if (o.n == 0) return;
        if (n == 0) {
            *this = o;
            return;
        }
        const double total = static_cast<double>(n + o.n);
        const double delta = o.mean - mean;
        mean += delta * static_cast<double>(o.n) / total;
        m2 += o.m2 + delta * delta * static_cast<double>(n) * static_cast<double>(o.n) / total;
        n += o.n;
    }

    double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
    double standard_error() const { return n > 0 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0; }
};

/// Chunk size for reductions; fixed so results are independent of thread count.
inline constexpr std::size_t kReductionChunk = std::size_t{1} << 15;

template <typename Value>
Moments chunked_moments(std::size_t count, unsigned threads, Value&& value) {
    const std::size_t chunks = (count + kReductionChunk - 1) / kReductionChunk;
    std::vector<Moments> partial(chunks);
    parallel_for(chunks, threads, [&](std::size_t c) {
        const std::size_t end = std::min(count, (c + 1) * kReductionChunk);
        for (std::size_t i = c * kReductionChunk; i < end; ++i) partial[c].add(value(i));
    });
    Moments total;
    for (const Moments& m : partial) total.merge(m);
    return total;
}

} // namespace icepath
