#include "fmmds/verify.hpp"

#include "fmmds/fmm.hpp"
#include "fmmds/workload.hpp"

#include <algorithm>
#include <cstdlib>

namespace fmmds
{

namespace
{

std::vector<BoxCoords> coords_of(const LevelBoxes& boxes, int level)
{
    std::vector<BoxCoords> c(boxes.size());
    for (std::size_t i = 0; i < boxes.size(); ++i)
    {
        c[i] = deinterleave({level, boxes.index[i]});
    }
    return c;
}

std::uint32_t cheb(const BoxCoords& a, const BoxCoords& b)
{
    auto d = [](std::uint32_t x, std::uint32_t y) { return x > y ? x - y : y - x; };
    return std::max({d(a.ix, b.ix), d(a.iy, b.iy), d(a.iz, b.iz)});
}

BoxCoords up(const BoxCoords& c) { return {c.level - 1, c.ix / 2, c.iy / 2, c.iz / 2}; }

CheckResult result(std::string name, std::string metric, double value, bool pass)
{
    return {std::move(name), std::move(metric), value, pass};
}

} // namespace

CheckResult check_neighbor_table(const FmmStructures& s)
{
    const int   L    = s.l_max;
    const auto  src  = coords_of(s.directory.sources[L], L);
    const auto  recv = coords_of(s.directory.receivers[L], L);
    std::size_t bad  = 0;
    for (std::size_t r = 0; r < recv.size(); ++r)
    {
        std::vector<Count> want;
        for (std::size_t v = 0; v < src.size(); ++v)
        {
            if (cheb(recv[r], src[v]) <= 1) want.push_back(Count(v));
        }
        auto got = s.neighbors.segment(r);
        if (!std::equal(want.begin(), want.end(), got.begin(), got.end())) ++bad;
    }
    return result("neighbor_table", "wrong_segments", double(bad), bad == 0);
}

CheckResult check_translation_stencils(const FmmStructures& s)
{
    std::size_t bad = 0;
    for (int l = 2; l <= s.l_max; ++l)
    {
        const auto src  = coords_of(s.directory.sources[l], l);
        const auto recv = coords_of(s.directory.receivers[l], l);
        for (std::size_t r = 0; r < recv.size(); ++r)
        {
            std::vector<Count> want;
            for (std::size_t v = 0; v < src.size(); ++v)
            {
                if (cheb(up(recv[r]), up(src[v])) <= 1 && cheb(recv[r], src[v]) > 1) want.push_back(Count(v));
            }
            auto got = s.stencils.levels[l].segment(r);
            if (!std::equal(want.begin(), want.end(), got.begin(), got.end())) ++bad;
        }
    }
    return result("translation_stencils", "wrong_segments", double(bad), bad == 0);
}

CheckResult check_coverage(const FmmStructures& s, std::uint64_t seed, std::uint64_t exhaustive_limit,
                           std::size_t sample)
{
    const int   L      = s.l_max;
    const auto& finest = s.directory.sources[L].index;
    const auto& recvL  = s.directory.receivers[L];

    std::vector<std::size_t> chosen = boxes_at_level(L) <= exhaustive_limit
                                          ? sample_indices(recvL.size(), recvL.size(), seed)
                                          : sample_indices(recvL.size(), sample, seed);
    std::size_t        bad = 0;
    std::vector<Count> hits(finest.size());
    for (std::size_t r : chosen)
    {
        std::fill(hits.begin(), hits.end(), 0);
        for (Count v : s.neighbors.segment(r))
        {
            ++hits[v];
        }
        std::uint64_t box = recvL.index[r];
        for (int l = 2; l <= L; ++l)
        {
            std::uint64_t anc  = box >> (3 * (L - l));
            auto          rank = s.directory.receivers[l].rank_of(anc);
            if (!rank) { ++bad; continue; }
            int shift = 3 * (L - l);
            for (Count v : s.stencils.levels[l].segment(*rank))
            {
                std::uint64_t b  = s.directory.sources[l].index[v];
                auto          lo = std::lower_bound(finest.begin(), finest.end(), b << shift);
                auto          hi = std::lower_bound(finest.begin(), finest.end(), (b + 1) << shift);
                for (auto it = lo; it != hi; ++it)
                {
                    ++hits[it - finest.begin()];
                }
            }
        }
        for (Count h : hits)
        {
            if (h != 1) ++bad;
        }
    }
    return result("coverage", "bad_pairs", double(bad), bad == 0);
}

CheckResult check_pseudosort(std::span<const ChargedPoint> input, const SortedPointSet<ChargedPoint>& sorted)
{
    std::size_t bad = 0;
    const auto  n   = input.size();
    if (sorted.points.size() != n || sorted.permutation.size() != n) { return result("pseudosort", "violations", 1, false); }

    std::vector<std::uint8_t> seen(n, 0);
    for (std::size_t j = 0; j < n; ++j)
    {
        Count i = sorted.permutation[j];
        if (i >= n || seen[i]++) { ++bad; continue; }
        if (!(sorted.points[j] == input[i])) ++bad;
    }
    std::vector<Count> bins(boxes_at_level(sorted.level), 0);
    for (const auto& p : input)
    {
        ++bins[box_index_of_point(p.position, sorted.level).index];
    }
    if (sorted.bookmarks.size() != sorted.num_boxes() + 1 || sorted.bookmarks.front() != 0 || sorted.bookmarks.back() != n)
    {
        ++bad;
    }
    for (std::size_t i = 0; i < sorted.num_boxes() && bad == 0; ++i)
    {
        std::uint64_t box = sorted.non_empty_index[i];
        if (i > 0 && box <= sorted.non_empty_index[i - 1]) ++bad;
        if (sorted.bookmarks[i + 1] - sorted.bookmarks[i] != bins[box]) ++bad;
        for (const auto& p : sorted.box_points(i))
        {
            if (box_index_of_point(p.position, sorted.level).index != box) ++bad;
        }
    }
    std::size_t nonEmpty = std::count_if(bins.begin(), bins.end(), [](Count c) { return c > 0; });
    if (nonEmpty != sorted.num_boxes()) ++bad;
    return result("pseudosort", "violations", double(bad), bad == 0);
}

CheckResult check_worker_invariance(std::span<const ChargedPoint> sources, std::span<const Point3> receivers, int l_max)
{
    BuildOptions opts;
    opts.l_max     = l_max;
    opts.sort.mode = SortMode::deterministic;
    std::size_t differing = 0;
    opts.sort.workers     = 1;
    FmmStructures base    = build_all(sources, receivers, opts);
    for (unsigned w : {2u, 3u})
    {
        opts.sort.workers = w;
        if (!(build_all(sources, receivers, opts) == base)) ++differing;
        // parallel mode may reorder inside boxes but never the box layout
        BuildOptions par = opts;
        par.sort.mode    = SortMode::parallel;
        FmmStructures p  = build_all(sources, receivers, par);
        if (p.sources.bookmarks != base.sources.bookmarks || p.sources.non_empty_index != base.sources.non_empty_index ||
            p.neighbors != base.neighbors || p.stencils != base.stencils)
        {
            ++differing;
        }
    }
    return result("worker_invariance", "differing_builds", double(differing), differing == 0);
}

CheckResult check_pathways(const FmmStructures& s)
{
    auto        counts = pathway_counts(s);
    std::size_t bad    = 0;
    for (auto c : counts)
    {
        if (c != s.sources.points.size()) ++bad;
    }
    return result("pathways", "bad_receivers", double(bad), bad == 0);
}

CheckResult check_boxtypes(const LevelDirectory& dir, const PartitionPlan& plan, std::uint64_t seed)
{
    std::size_t bad = 0;
    for (int J = 0; J < plan.nodes; ++J)
    {
        TypedBoxList got      = classify(J, dir, plan);
        TypedBoxList shuffled = classify(J, dir, plan, {0, seed});
        if (!(got == shuffled)) ++bad;
        for (int l = 2; l <= dir.l_max; ++l)
        {
            for (std::size_t i = 0; i < dir.sources[l].size(); ++i)
            {
                MortonKey key{l, dir.sources[l].index[i]};
                BoxType   want = BoxType::DOMESTIC;
                if (l == plan.l_crit)
                {
                    Owners o = owner_of(key, plan);
                    if (J < o.first_node || J > o.last_node) want = BoxType::IMPORT;
                    else if (o.first_node != o.last_node) want = BoxType::ROOT;
                    else if (plan.nodes > 1) want = BoxType::EXPORT;
                }
                else if (l > plan.l_crit)
                {
                    bool local = node_of(key, plan) == J, offSeen = false, onSeen = false;
                    for (auto q : e4_neighbors(key))
                    {
                        (node_of(q, plan) == J ? onSeen : offSeen) = true;
                    }
                    if (local) want = offSeen ? BoxType::EXPORT : BoxType::DOMESTIC;
                    else want = onSeen ? BoxType::IMPORT : BoxType::OTHER;
                }
                if (got.levels[l].type[i] != want) ++bad;
            }
        }
    }
    return result("box_types", "mismatches", double(bad), bad == 0);
}

std::vector<CheckResult> run_structure_checks(std::span<const ChargedPoint> sources, std::span<const Point3> receivers,
                                              const FmmStructures& s, std::uint64_t seed)
{
    std::vector<CheckResult> out;
    out.push_back(check_pseudosort(sources, s.sources));
    out.push_back(check_neighbor_table(s));
    out.push_back(check_translation_stencils(s));
    out.push_back(check_coverage(s, seed));
    out.push_back(check_pathways(s));
    out.push_back(check_worker_invariance(sources, receivers, s.l_max));
    return out;
}

} // namespace fmmds
