#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace fmmds
{

//! 0 means "one worker per hardware thread".
inline unsigned resolve_workers(unsigned requested)
{
    if (requested != 0) { return requested; }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
}

//! Boundaries of chunk c when [0, n) is split into numChunks near-equal pieces.
inline std::size_t chunk_begin(std::size_t n, std::size_t numChunks, std::size_t c)
{
    return n * c / numChunks;
}

/*! @brief Run f(chunk, begin, end) over [0, n) split into `workers` contiguous chunks
 *
 * Chunk boundaries depend only on n and the worker count. The call blocks until every
 * chunk is done; chunk 0 runs on the calling thread.
 */
template<class F>
void parallel_chunks(std::size_t n, unsigned workers, F&& f)
{
    unsigned numChunks = std::max(1u, resolve_workers(workers));
    if (n < numChunks) { numChunks = std::max<std::size_t>(1, n); }

    if (numChunks == 1)
    {
        f(std::size_t(0), std::size_t(0), n);
        return;
    }

    std::vector<std::jthread> pool;
    pool.reserve(numChunks - 1);
    for (unsigned c = 1; c < numChunks; ++c)
    {
        pool.emplace_back([&f, n, numChunks, c] {
            f(std::size_t(c), chunk_begin(n, numChunks, c), chunk_begin(n, numChunks, c + 1));
        });
    }
    f(std::size_t(0), std::size_t(0), chunk_begin(n, numChunks, 1));
}

//! Element-wise variant of parallel_chunks.
template<class F>
void parallel_for(std::size_t n, unsigned workers, F&& f)
{
    parallel_chunks(n, workers, [&f](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i)
        {
            f(i);
        }
    });
}

} // namespace fmmds
