/*! @file
 * @brief Linear-time grouping of points by their finest-level Morton box
 *
 * Points are binned with a dense histogram over all 8^l_max boxes, each point receives a
 * rank inside its box, and a scan of the histogram turns (box, rank) into a destination
 * slot. Points inside one box keep no particular order unless deterministic mode is used.
 */
#pragma once

#include "fmmds/morton.hpp"
#include "fmmds/scan.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fmmds
{

enum class SortMode
{
    //! Shared histogram with atomic fetch-and-add; within-box order depends on scheduling.
    parallel,
    //! Per-worker partial histograms merged in chunk order; within-box order follows input order.
    deterministic,
};

inline constexpr std::size_t kDefaultHistogramBudget = std::size_t(1) << 30;

struct SortOptions
{
    SortMode    mode{SortMode::parallel};
    unsigned    workers{0};
    std::size_t memory_budget_bytes{kDefaultHistogramBudget};
};

struct SortIndexEntry
{
    std::uint64_t box{0};
    Count         rank_in_box{0};

    friend bool operator==(const SortIndexEntry&, const SortIndexEntry&) = default;
};

struct BoxHistogram
{
    int                         level{0};
    std::vector<Count>          bins;       //!< dense, length 8^level
    std::vector<SortIndexEntry> sort_index; //!< one entry per input point
};

/*! @brief Bin points at level l_max and rank each point inside its box
 *
 * Throws CapacityError when the dense histogram (8^l_max counts, times the number of
 * partial histograms in deterministic mode) exceeds options.memory_budget_bytes.
 */
BoxHistogram histogram_and_sort_index(std::span<const Point3> points, int l_max, const SortOptions& options = {});

struct Bookmarks
{
    std::vector<Count>         bookmarks;       //!< length numNonEmpty + 1, bookmarks[0] = 0
    std::vector<std::uint64_t> non_empty_index; //!< strictly increasing Morton indices
};

Bookmarks build_bookmarks(std::span<const Count> bins, unsigned workers = 0);

template<class P>
struct SortedPointSet
{
    int                        level{0};
    std::vector<P>             points;          //!< grouped by box, boxes in Morton order
    std::vector<Count>         permutation;     //!< sorted slot -> original position
    std::vector<Count>         bookmarks;       //!< box slice i is [bookmarks[i], bookmarks[i+1])
    std::vector<std::uint64_t> non_empty_index; //!< Morton index of non-empty box i

    std::size_t num_boxes() const { return non_empty_index.size(); }
    std::size_t box_begin(std::size_t i) const { return bookmarks[i]; }
    std::size_t box_end(std::size_t i) const { return bookmarks[i + 1]; }
    std::span<const P> box_points(std::size_t i) const
    {
        return std::span<const P>(points).subspan(bookmarks[i], bookmarks[i + 1] - bookmarks[i]);
    }

    friend bool operator==(const SortedPointSet&, const SortedPointSet&) = default;
};

/*! @brief Scatter points to their sorted slots
 *
 * The point with sort entry (b, r) lands at box_offsets[b] + r, where box_offsets is the
 * exclusive scan of the histogram. Throws DomainError on inconsistent inputs.
 */
template<class P>
SortedPointSet<P> reorder(std::span<const P> points, std::span<const SortIndexEntry> sort_index,
                          std::span<const Count> box_offsets, Bookmarks bookmarks, int level, unsigned workers = 0);

//! Histogram, bookmarks and reorder in one call; the dense histogram is released on return.
template<class P>
SortedPointSet<P> pseudo_sort(std::span<const P> points, int l_max, const SortOptions& options = {});

extern template SortedPointSet<Point3> reorder(std::span<const Point3>, std::span<const SortIndexEntry>,
                                               std::span<const Count>, Bookmarks, int, unsigned);
extern template SortedPointSet<ChargedPoint> reorder(std::span<const ChargedPoint>,
                                                     std::span<const SortIndexEntry>, std::span<const Count>,
                                                     Bookmarks, int, unsigned);
extern template SortedPointSet<Point3> pseudo_sort(std::span<const Point3>, int, const SortOptions&);
extern template SortedPointSet<ChargedPoint> pseudo_sort(std::span<const ChargedPoint>, int, const SortOptions&);

} // namespace fmmds
