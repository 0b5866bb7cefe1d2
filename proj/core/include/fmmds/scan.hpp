/*! @file
 * @brief Blocked parallel prefix sums and stream compaction
 *
 * Counts are 32-bit unsigned, like the histograms they scan. Results are identical for
 * every worker count: chunk totals are combined serially in chunk order.
 */
#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace fmmds
{

using Count = std::uint32_t;

struct ScanResult
{
    std::vector<Count> values; //!< out[0] = 0, out[i] = out[i-1] + in[i-1]
    Count              total{0};
};

//! Throws CapacityError if the sum does not fit in a Count.
ScanResult exclusive_scan(std::span<const Count> in, unsigned workers = 0);

struct Compaction
{
    std::vector<Count> ranks; //!< exclusive scan of the flags; compacted slot of every flagged entry
    Count              count{0};
};

//! Flags must be 0 or 1 (DomainError otherwise).
Compaction compact_flags(std::span<const Count> flags, unsigned workers = 0);

} // namespace fmmds
