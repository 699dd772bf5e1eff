#pragma once

// Deterministic chunked parallelism. Work is split at fixed chunk boundaries
// (rounded up to a multiple of 64 so bitset words never straddle chunks);
// thread count affects scheduling only, never which chunk owns which range.
// If chunks throw, the exception from the lowest-numbered chunk wins, so
// failures are reproducible at any thread count.

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace recurlab {

struct ParallelContext {
    int threads = 1;
    long chunk = 65536;
};

// Chunk width actually used by parallel_chunks; callers that keep per-chunk
// partial results index them as (lo - begin) / effective_chunk(ctx).
inline long effective_chunk(const ParallelContext& ctx) {
    return std::max<long>(64, (ctx.chunk + 63) / 64 * 64);
}

template <class Fn>
void parallel_chunks(long begin, long end, const ParallelContext& ctx, Fn&& fn) {
    if (end <= begin) return;
    long chunk = effective_chunk(ctx);
    long nchunks = (end - begin + chunk - 1) / chunk;
    int threads = std::max(1, ctx.threads);

    auto run_chunk = [&](long c) {
        long lo = begin + c * chunk;
        long hi = std::min(end, lo + chunk);
        fn(lo, hi);
    };

    if (threads == 1 || nchunks == 1) {
        for (long c = 0; c < nchunks; ++c) run_chunk(c);
        return;
    }

    std::mutex mu;
    long bad_chunk = -1;
    std::exception_ptr eptr;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (long c = t; c < nchunks; c += threads) {
                try {
                    run_chunk(c);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (bad_chunk < 0 || c < bad_chunk) {
                        bad_chunk = c;
                        eptr = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (eptr) std::rethrow_exception(eptr);
}

} // namespace recurlab
