#include "fmmds/scan.hpp"

#include "fmmds/errors.hpp"
#include "fmmds/parallel.hpp"

#include <atomic>
#include <limits>

namespace fmmds
{

ScanResult exclusive_scan(std::span<const Count> in, unsigned workers)
{
    ScanResult result;
    result.values.resize(in.size());
    if (in.empty()) return result;

    unsigned numChunks = std::max(1u, resolve_workers(workers));
    if (in.size() < numChunks) numChunks = unsigned(in.size());

    std::vector<std::uint64_t> chunkTotals(numChunks, 0);
    parallel_chunks(in.size(), numChunks, [&](std::size_t c, std::size_t b, std::size_t e) {
        std::uint64_t sum = 0;
        for (std::size_t i = b; i < e; ++i)
        {
            sum += in[i];
        }
        chunkTotals[c] = sum;
    });

    std::vector<Count> chunkOffsets(numChunks, 0);
    std::uint64_t      running = 0;
    for (unsigned c = 0; c < numChunks; ++c)
    {
        chunkOffsets[c] = Count(running);
        running += chunkTotals[c];
        if (running > std::numeric_limits<Count>::max())
        {
            throw CapacityError("prefix sum exceeds the 32-bit count range");
        }
    }
    result.total = Count(running);

    parallel_chunks(in.size(), numChunks, [&](std::size_t c, std::size_t b, std::size_t e) {
        Count acc = chunkOffsets[c];
        for (std::size_t i = b; i < e; ++i)
        {
            result.values[i] = acc;
            acc += in[i];
        }
    });
    return result;
}

Compaction compact_flags(std::span<const Count> flags, unsigned workers)
{
    std::atomic<bool> nonBinary{false};
    parallel_chunks(flags.size(), workers, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i)
        {
            if (flags[i] > 1)
            {
                nonBinary.store(true, std::memory_order_relaxed);
                return;
            }
        }
    });
    if (nonBinary) { throw DomainError("compact_flags expects 0/1 flags"); }

    ScanResult scanned = exclusive_scan(flags, workers);
    return {std::move(scanned.values), scanned.total};
}

} // namespace fmmds
