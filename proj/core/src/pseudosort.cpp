#include "fmmds/pseudosort.hpp"

#include "fmmds/errors.hpp"
#include "fmmds/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <limits>
#include <string>

namespace fmmds
{

namespace
{

void check_budget(int l_max, std::size_t copies, std::size_t budget)
{
    if (l_max < 0 || l_max > kMaxLevel) { throw CapacityError("l_max " + std::to_string(l_max) + " out of range"); }
    // compare in long double so 8^20 * copies cannot wrap
    long double bytes = (long double)boxes_at_level(l_max) * sizeof(Count) * copies;
    if (bytes > (long double)budget)
    {
        throw CapacityError("dense histogram for l_max=" + std::to_string(l_max) + " needs " +
                            std::to_string((unsigned long long)bytes) + " bytes, above the " +
                            std::to_string(budget) + "-byte memory budget");
    }
}

template<class P>
BoxHistogram histogram_impl(std::span<const P> points, int l_max, const SortOptions& options)
{
    check_budget(l_max, 1, options.memory_budget_bytes);
    if (points.size() > std::numeric_limits<Count>::max())
    {
        throw CapacityError("point count exceeds the 32-bit count range");
    }

    BoxHistogram hist;
    hist.level = l_max;
    hist.bins.assign(boxes_at_level(l_max), 0);
    hist.sort_index.resize(points.size());

    // validate up front so that worker threads never throw
    for (const auto& p : points)
    {
        const Point3& x = position_of(p);
        if (!(x.x >= 0 && x.x <= 1 && x.y >= 0 && x.y <= 1 && x.z >= 0 && x.z <= 1))
        {
            throw DomainError("point outside the unit cube");
        }
    }

    unsigned workers = resolve_workers(options.workers);

    if (options.mode == SortMode::parallel)
    {
        parallel_for(points.size(), workers, [&](std::size_t i) {
            std::uint64_t box  = box_index_of_point(position_of(points[i]), l_max).index;
            Count         rank = std::atomic_ref<Count>(hist.bins[box]).fetch_add(1, std::memory_order_relaxed);
            hist.sort_index[i] = {box, rank};
        });
        return hist;
    }

    // deterministic: one partial histogram per chunk, merged by a per-box scan over chunks
    std::size_t numChunks = std::min<std::size_t>(workers, std::max<std::size_t>(1, points.size()));
    long double partialBytes = (long double)boxes_at_level(l_max) * sizeof(Count) * (numChunks + 1);
    if (partialBytes > (long double)options.memory_budget_bytes) { numChunks = 1; }

    if (numChunks == 1)
    {
        for (std::size_t i = 0; i < points.size(); ++i)
        {
            std::uint64_t box  = box_index_of_point(position_of(points[i]), l_max).index;
            hist.sort_index[i] = {box, hist.bins[box]++};
        }
        return hist;
    }

    std::vector<std::vector<Count>> partial(numChunks, std::vector<Count>(hist.bins.size(), 0));
    parallel_chunks(points.size(), unsigned(numChunks), [&](std::size_t c, std::size_t b, std::size_t e) {
        auto& local = partial[c];
        for (std::size_t i = b; i < e; ++i)
        {
            std::uint64_t box  = box_index_of_point(position_of(points[i]), l_max).index;
            hist.sort_index[i] = {box, local[box]++};
        }
    });
    parallel_for(hist.bins.size(), unsigned(numChunks), [&](std::size_t box) {
        Count run = 0;
        for (std::size_t c = 0; c < numChunks; ++c)
        {
            Count t         = partial[c][box];
            partial[c][box] = run;
            run += t;
        }
        hist.bins[box] = run;
    });
    parallel_chunks(points.size(), unsigned(numChunks), [&](std::size_t c, std::size_t b, std::size_t e) {
        const auto& offsets = partial[c];
        for (std::size_t i = b; i < e; ++i)
        {
            hist.sort_index[i].rank_in_box += offsets[hist.sort_index[i].box];
        }
    });
    return hist;
}

} // namespace

BoxHistogram histogram_and_sort_index(std::span<const Point3> points, int l_max, const SortOptions& options)
{
    return histogram_impl(points, l_max, options);
}

Bookmarks build_bookmarks(std::span<const Count> bins, unsigned workers)
{
    std::vector<Count> flags(bins.size());
    parallel_for(bins.size(), workers, [&](std::size_t i) { flags[i] = bins[i] > 0 ? 1 : 0; });

    Compaction compacted = compact_flags(flags, workers);
    ScanResult offsets   = exclusive_scan(bins, workers);

    Bookmarks out;
    out.bookmarks.resize(std::size_t(compacted.count) + 1);
    out.non_empty_index.resize(compacted.count);
    parallel_for(bins.size(), workers, [&](std::size_t i) {
        if (bins[i] > 0)
        {
            out.bookmarks[compacted.ranks[i]]       = offsets.values[i];
            out.non_empty_index[compacted.ranks[i]] = i;
        }
    });
    out.bookmarks[compacted.count] = offsets.total;
    return out;
}

template<class P>
SortedPointSet<P> reorder(std::span<const P> points, std::span<const SortIndexEntry> sort_index,
                          std::span<const Count> box_offsets, Bookmarks bookmarks, int level, unsigned workers)
{
    if (points.size() != sort_index.size())
    {
        throw DomainError("reorder: point count and sort index length differ");
    }
    if (bookmarks.bookmarks.empty() || bookmarks.bookmarks.back() != points.size() ||
        bookmarks.bookmarks.size() != bookmarks.non_empty_index.size() + 1)
    {
        throw DomainError("reorder: bookmarks do not describe this point set");
    }
    for (const auto& entry : sort_index)
    {
        if (entry.box >= box_offsets.size() || std::size_t(box_offsets[entry.box]) + entry.rank_in_box >= points.size())
        {
            throw DomainError("reorder: sort index entry outside the histogram");
        }
    }

    SortedPointSet<P> out;
    out.level = level;
    out.points.resize(points.size());
    out.permutation.resize(points.size());
    parallel_for(points.size(), workers, [&](std::size_t i) {
        std::size_t slot     = std::size_t(box_offsets[sort_index[i].box]) + sort_index[i].rank_in_box;
        out.points[slot]      = points[i];
        out.permutation[slot] = Count(i);
    });
    out.bookmarks       = std::move(bookmarks.bookmarks);
    out.non_empty_index = std::move(bookmarks.non_empty_index);
    return out;
}

template<class P>
SortedPointSet<P> pseudo_sort(std::span<const P> points, int l_max, const SortOptions& options)
{
    Bookmarks          marks;
    std::vector<Count> offsets;
    std::vector<SortIndexEntry> sortIndex;
    {
        BoxHistogram hist = histogram_impl(points, l_max, options);
        marks             = build_bookmarks(hist.bins, options.workers);
        offsets           = exclusive_scan(hist.bins, options.workers).values;
        sortIndex         = std::move(hist.sort_index);
    }
    return reorder<P>(points, sortIndex, offsets, std::move(marks), l_max, options.workers);
}

template SortedPointSet<Point3> reorder(std::span<const Point3>, std::span<const SortIndexEntry>,
                                        std::span<const Count>, Bookmarks, int, unsigned);
template SortedPointSet<ChargedPoint> reorder(std::span<const ChargedPoint>, std::span<const SortIndexEntry>,
                                              std::span<const Count>, Bookmarks, int, unsigned);
template SortedPointSet<Point3> pseudo_sort(std::span<const Point3>, int, const SortOptions&);
template SortedPointSet<ChargedPoint> pseudo_sort(std::span<const ChargedPoint>, int, const SortOptions&);

} // namespace fmmds
