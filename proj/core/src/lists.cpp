#include "fmmds/lists.hpp"

#include "fmmds/errors.hpp"
#include "fmmds/parallel.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>

namespace fmmds
{

DenseRankMap DenseRankMap::from_bins(int level, std::span<const Count> bins, unsigned workers)
{
    if (bins.size() != boxes_at_level(level)) { throw DomainError("histogram length does not match the level"); }
    std::vector<Count> flags(bins.size());
    parallel_for(bins.size(), workers, [&](std::size_t i) { flags[i] = bins[i] > 0 ? 1 : 0; });
    Compaction   c = compact_flags(flags, workers);
    DenseRankMap map{level, std::move(c.ranks)};
    map.rank.push_back(c.count);
    return map;
}

DenseRankMap DenseRankMap::from_non_empty(int level, std::span<const std::uint64_t> non_empty, unsigned workers)
{
    std::vector<Count> flags(boxes_at_level(level), 0);
    for (std::uint64_t b : non_empty)
    {
        if (b >= flags.size()) { throw DomainError("box index outside the level"); }
        flags[b] = 1;
    }
    Compaction   c = compact_flags(flags, workers);
    DenseRankMap map{level, std::move(c.ranks)};
    map.rank.push_back(c.count);
    return map;
}

NeighborTable build_neighbor_table(const DenseRankMap& sources, std::span<const std::uint64_t> recv_non_empty,
                                   unsigned workers)
{
    const int   level = sources.level;
    std::size_t numRecv = recv_non_empty.size();

    // fixed 27-slot staging per receiver, compacted after a scan of the counts
    std::vector<Count>                 counts(numRecv, 0);
    std::vector<std::array<Count, 27>> staging(numRecv);
    parallel_for(numRecv, workers, [&](std::size_t i) {
        Count n = 0;
        for_each_e2_neighbor({level, recv_non_empty[i]}, [&](std::uint64_t nb) {
            if (sources.occupied(nb)) { staging[i][n++] = sources.rank_of(nb); }
        });
        std::sort(staging[i].begin(), staging[i].begin() + n);
        counts[i] = n;
    });

    ScanResult    scanned = exclusive_scan(counts, workers);
    NeighborTable table;
    table.bookmark = std::move(scanned.values);
    table.bookmark.push_back(scanned.total);
    table.list.resize(scanned.total);
    parallel_for(numRecv, workers, [&](std::size_t i) {
        std::copy_n(staging[i].begin(), counts[i], table.list.begin() + table.bookmark[i]);
    });
    return table;
}

std::vector<ChargedPoint> gather_e2_sources(const NeighborTable& table, const SortedPointSet<ChargedPoint>& sources,
                                            std::size_t i)
{
    if (i >= table.num_segments())
    {
        throw DomainError("receiver box ordinal " + std::to_string(i) + " out of range");
    }
    std::vector<ChargedPoint> out;
    for_each_e2_source_box(table, sources, i, [&](std::span<const ChargedPoint> pts) {
        out.insert(out.end(), pts.begin(), pts.end());
    });
    return out;
}

std::optional<Count> LevelBoxes::rank_of(std::uint64_t box) const
{
    auto it = std::lower_bound(index.begin(), index.end(), box);
    if (it == index.end() || *it != box) return std::nullopt;
    return Count(it - index.begin());
}

std::vector<LevelBoxes> propagate_levels(std::span<const std::uint64_t> finest, int l_max)
{
    if (l_max < 0 || l_max > kMaxLevel) { throw DomainError("l_max out of range"); }
    if (!std::is_sorted(finest.begin(), finest.end()) ||
        std::adjacent_find(finest.begin(), finest.end()) != finest.end())
    {
        throw DomainError("finest-level boxes must be strictly increasing");
    }
    if (!finest.empty() && finest.back() >= boxes_at_level(l_max))
    {
        throw DomainError("box index outside the finest level");
    }

    std::vector<LevelBoxes> levels(l_max + 1);
    levels[l_max].index.assign(finest.begin(), finest.end());
    for (int l = l_max; l > 0; --l)
    {
        auto& child  = levels[l];
        auto& parent = levels[l - 1];
        child.parent_rank.resize(child.index.size());
        for (std::size_t i = 0; i < child.index.size(); ++i)
        {
            std::uint64_t p = child.index[i] >> 3;
            if (parent.index.empty() || parent.index.back() != p) { parent.index.push_back(p); }
            child.parent_rank[i] = Count(parent.index.size() - 1);
        }
    }
    return levels;
}

LevelDirectory build_level_directory(std::span<const std::uint64_t> src_non_empty,
                                     std::span<const std::uint64_t> recv_non_empty, int l_max)
{
    return {l_max, propagate_levels(src_non_empty, l_max), propagate_levels(recv_non_empty, l_max)};
}

TranslationStencils build_translation_stencils(const LevelDirectory& directory, unsigned workers,
                                               std::size_t memory_budget_bytes)
{
    TranslationStencils stencils;
    stencils.levels.resize(directory.l_max + 1);
    for (int l = 0; l <= directory.l_max; ++l)
    {
        const auto& recv = directory.receivers[l].index;
        auto&       out  = stencils.levels[l];
        if (l < 2 || directory.sources[l].index.empty())
        {
            out.bookmark.assign(recv.size() + 1, 0);
            continue;
        }
        if ((long double)boxes_at_level(l) * 2 * sizeof(Count) > (long double)memory_budget_bytes)
        {
            throw CapacityError("dense rank map for level " + std::to_string(l) + " exceeds the memory budget");
        }
        DenseRankMap src = DenseRankMap::from_non_empty(l, directory.sources[l].index, workers);

        std::vector<Count> counts(recv.size(), 0);
        parallel_for(recv.size(), workers, [&](std::size_t i) {
            Count n = 0;
            for_each_e4_neighbor({l, recv[i]}, [&](std::uint64_t nb, int, int, int) { n += src.occupied(nb); });
            counts[i] = n;
        });
        ScanResult scanned = exclusive_scan(counts, workers);
        out.bookmark       = std::move(scanned.values);
        out.bookmark.push_back(scanned.total);
        out.list.resize(scanned.total);
        parallel_for(recv.size(), workers, [&](std::size_t i) {
            Count* dst = out.list.data() + out.bookmark[i];
            Count  n   = 0;
            for_each_e4_neighbor({l, recv[i]}, [&](std::uint64_t nb, int, int, int) {
                if (src.occupied(nb)) { dst[n++] = src.rank_of(nb); }
            });
            std::sort(dst, dst + n);
        });
    }
    return stencils;
}

int level_for_cluster_size(std::size_t numPoints, std::size_t cluster_size)
{
    if (cluster_size == 0) { throw DomainError("cluster size must be positive"); }
    for (int l = 0; l <= kMaxLevel; ++l)
    {
        std::uint64_t boxes = boxes_at_level(l);
        if ((numPoints + boxes - 1) / boxes <= cluster_size) return l;
    }
    return kMaxLevel;
}

FmmStructures build_all(std::span<const ChargedPoint> sources, std::span<const Point3> receivers,
                        const BuildOptions& options, std::vector<PhaseTiming>* profile)
{
    int l_max = 0;
    if (options.l_max) { l_max = *options.l_max; }
    else if (options.cluster_size)
    {
        l_max = level_for_cluster_size(std::max(sources.size(), receivers.size()), *options.cluster_size);
    }
    else { throw DomainError("build_all needs either l_max or a cluster size"); }
    if (l_max < 0 || l_max > kMaxLevel) { throw CapacityError("l_max " + std::to_string(l_max) + " out of range"); }

    using clock = std::chrono::steady_clock;
    auto start  = clock::now();
    auto lap    = [&](const char* name) {
        auto now = clock::now();
        if (profile) { profile->push_back({name, std::chrono::duration<double>(now - start).count()}); }
        start = now;
    };

    FmmStructures s;
    s.l_max   = l_max;
    s.sources = pseudo_sort<ChargedPoint>(sources, l_max, options.sort);
    lap("sort_sources");
    s.receivers = pseudo_sort<Point3>(receivers, l_max, options.sort);
    lap("sort_receivers");
    {
        DenseRankMap srcRanks = DenseRankMap::from_non_empty(l_max, s.sources.non_empty_index, options.sort.workers);
        s.neighbors           = build_neighbor_table(srcRanks, s.receivers.non_empty_index, options.sort.workers);
    }
    lap("neighbor_table");
    s.directory = build_level_directory(s.sources.non_empty_index, s.receivers.non_empty_index, l_max);
    lap("level_directory");
    s.stencils = build_translation_stencils(s.directory, options.sort.workers, options.sort.memory_budget_bytes);
    lap("translation_stencils");
    return s;
}

namespace
{

void put_segments(ByteWriter& w, const SegmentTable& t)
{
    w.array_u32(t.bookmark);
    w.array_u32(t.list);
}

SegmentTable get_segments(ByteReader& r)
{
    SegmentTable t;
    t.bookmark = r.array_u32();
    t.list     = r.array_u32();
    if (t.bookmark.empty() || t.bookmark.front() != 0 || t.bookmark.back() != t.list.size() ||
        !std::is_sorted(t.bookmark.begin(), t.bookmark.end()))
    {
        throw FormatError("inconsistent segment table");
    }
    return t;
}

void put_level_boxes(ByteWriter& w, const LevelBoxes& b)
{
    w.array_u64(b.index);
    w.array_u32(b.parent_rank);
}

LevelBoxes get_level_boxes(ByteReader& r)
{
    LevelBoxes b;
    b.index       = r.array_u64();
    b.parent_rank = r.array_u32();
    return b;
}

void put_point(ByteWriter& w, const Point3& p)
{
    w.f64(p.x);
    w.f64(p.y);
    w.f64(p.z);
}

Point3 get_point(ByteReader& r)
{
    Point3 p;
    p.x = r.f64();
    p.y = r.f64();
    p.z = r.f64();
    return p;
}

template<class P, class PutPoint>
void put_sorted(ByteWriter& w, const SortedPointSet<P>& s, PutPoint&& putPoint)
{
    w.i32(s.level);
    w.array(std::span<const P>(s.points), putPoint);
    w.array_u32(s.permutation);
    w.array_u32(s.bookmarks);
    w.array_u64(s.non_empty_index);
}

template<class P, class GetPoint>
SortedPointSet<P> get_sorted(ByteReader& r, std::size_t pointBytes, GetPoint&& getPoint)
{
    SortedPointSet<P> s;
    s.level = r.i32();
    s.points.resize(r.array_length(pointBytes));
    for (auto& p : s.points)
    {
        p = getPoint(r);
    }
    s.permutation     = r.array_u32();
    s.bookmarks       = r.array_u32();
    s.non_empty_index = r.array_u64();
    if (s.permutation.size() != s.points.size() || s.bookmarks.size() != s.non_empty_index.size() + 1 ||
        s.bookmarks.back() != s.points.size())
    {
        throw FormatError("inconsistent sorted point set");
    }
    return s;
}

} // namespace

ContainerSection structures_section(const FmmStructures& s)
{
    ByteWriter w;
    w.i32(s.l_max);
    // counts first so a reader can size everything up front
    w.u64(s.sources.points.size());
    w.u64(s.receivers.points.size());
    w.u64(s.sources.num_boxes());
    w.u64(s.receivers.num_boxes());

    put_sorted(w, s.sources, [](ByteWriter& bw, const ChargedPoint& p) {
        put_point(bw, p.position);
        bw.f64(p.q);
    });
    put_sorted(w, s.receivers, [](ByteWriter& bw, const Point3& p) { put_point(bw, p); });
    put_segments(w, s.neighbors);
    for (int l = 0; l <= s.l_max; ++l)
    {
        put_level_boxes(w, s.directory.sources[l]);
        put_level_boxes(w, s.directory.receivers[l]);
        put_segments(w, s.stencils.levels[l]);
    }
    return {ContainerSection::make_tag("STRC"), w.release()};
}

FmmStructures structures_from_section(const ContainerSection& section)
{
    if (std::string_view(section.tag.data(), 4) != "STRC") { throw FormatError("not a structures section"); }
    ByteReader    r(section.payload);
    FmmStructures s;
    s.l_max = r.i32();
    if (s.l_max < 0 || s.l_max > kMaxLevel) { throw FormatError("l_max out of range"); }
    std::uint64_t numSrc     = r.u64();
    std::uint64_t numRecv    = r.u64();
    std::uint64_t numSrcBox  = r.u64();
    std::uint64_t numRecvBox = r.u64();

    s.sources = get_sorted<ChargedPoint>(r, 32, [](ByteReader& br) {
        ChargedPoint p;
        p.position = get_point(br);
        p.q        = br.f64();
        return p;
    });
    s.receivers = get_sorted<Point3>(r, 24, [](ByteReader& br) { return get_point(br); });
    if (s.sources.points.size() != numSrc || s.receivers.points.size() != numRecv ||
        s.sources.num_boxes() != numSrcBox || s.receivers.num_boxes() != numRecvBox)
    {
        throw FormatError("header counts disagree with the stored arrays");
    }
    s.neighbors       = get_segments(r);
    s.directory.l_max = s.l_max;
    s.directory.sources.resize(s.l_max + 1);
    s.directory.receivers.resize(s.l_max + 1);
    s.stencils.levels.resize(s.l_max + 1);
    for (int l = 0; l <= s.l_max; ++l)
    {
        s.directory.sources[l]   = get_level_boxes(r);
        s.directory.receivers[l] = get_level_boxes(r);
        s.stencils.levels[l]     = get_segments(r);
    }
    if (!r.at_end()) { throw FormatError("trailing bytes in structures section"); }
    return s;
}

void save_structures(std::ostream& os, const FmmStructures& s)
{
    Container c;
    c.l_max = std::uint32_t(s.l_max);
    c.sections.push_back(structures_section(s));
    write_container(os, c);
}

FmmStructures load_structures(std::istream& is)
{
    Container c       = read_container(is);
    const auto* section = c.find("STRC");
    if (!section) { throw FormatError("container has no STRC section"); }
    return structures_from_section(*section);
}

} // namespace fmmds
