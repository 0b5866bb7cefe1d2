// Slow reference computations for the tests. Everything here works from grid coordinates
// and plain loops, never from the library's own predicates or tables.
#pragma once

#include "fmmds/morton.hpp"
#include "fmmds/partition.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <vector>

namespace oracle
{

struct Cell
{
    int          level;
    std::int64_t x, y, z;
};

// bit-by-bit interleave, coordinate bit b goes to index bit 3b (+1 for y, +2 for z)
inline std::uint64_t interleave(int level, std::uint64_t x, std::uint64_t y, std::uint64_t z)
{
    std::uint64_t out = 0;
    for (int b = 0; b < level; ++b)
    {
        out |= ((x >> b) & 1u) << (3 * b);
        out |= ((y >> b) & 1u) << (3 * b + 1);
        out |= ((z >> b) & 1u) << (3 * b + 2);
    }
    return out;
}

inline Cell cell_of(int level, std::uint64_t index)
{
    Cell c{level, 0, 0, 0};
    for (int b = 0; b < level; ++b)
    {
        c.x |= std::int64_t((index >> (3 * b)) & 1u) << b;
        c.y |= std::int64_t((index >> (3 * b + 1)) & 1u) << b;
        c.z |= std::int64_t((index >> (3 * b + 2)) & 1u) << b;
    }
    return c;
}

inline std::int64_t grid_coord(double v, int level)
{
    auto n = std::int64_t(1) << level;
    auto i = std::int64_t(std::floor(v * double(n)));
    return std::clamp<std::int64_t>(i, 0, n - 1);
}

inline std::uint64_t box_of(const fmmds::Point3& p, int level)
{
    return interleave(level, grid_coord(p.x, level), grid_coord(p.y, level), grid_coord(p.z, level));
}

inline std::int64_t chebyshev(const Cell& a, const Cell& b)
{
    return std::max({std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(a.z - b.z)});
}

inline Cell up(const Cell& c) { return {c.level - 1, c.x / 2, c.y / 2, c.z / 2}; }

inline bool adjacent(int level, std::uint64_t a, std::uint64_t b)
{
    return chebyshev(cell_of(level, a), cell_of(level, b)) <= 1;
}

// parents adjacent, boxes themselves not
inline bool well_separated_child(int level, std::uint64_t a, std::uint64_t b)
{
    if (level < 2) return false;
    Cell ca = cell_of(level, a), cb = cell_of(level, b);
    return chebyshev(up(ca), up(cb)) <= 1 && chebyshev(ca, cb) > 1;
}

inline std::vector<std::uint64_t> all_boxes_where(int level, auto&& pred)
{
    std::vector<std::uint64_t> out;
    for (std::uint64_t b = 0; b < (std::uint64_t(1) << (3 * level)); ++b)
    {
        if (pred(b)) out.push_back(b);
    }
    return out;
}

template<class P>
std::vector<std::uint64_t> occupied_boxes(std::span<const P> points, int level)
{
    std::set<std::uint64_t> s;
    for (const auto& p : points)
    {
        s.insert(box_of(fmmds::position_of(p), level));
    }
    return {s.begin(), s.end()};
}

inline std::vector<Cell> cells_of(int level, const std::vector<std::uint64_t>& boxes)
{
    std::vector<Cell> out;
    out.reserve(boxes.size());
    for (auto b : boxes)
    {
        out.push_back(cell_of(level, b));
    }
    return out;
}

// receiver box rank -> ranks of adjacent source boxes, both ascending
inline std::vector<std::vector<std::uint32_t>> neighbor_lists(int level, const std::vector<std::uint64_t>& sources,
                                                              const std::vector<std::uint64_t>& receivers)
{
    auto src = cells_of(level, sources), recv = cells_of(level, receivers);
    std::vector<std::vector<std::uint32_t>> out(receivers.size());
    for (std::size_t r = 0; r < recv.size(); ++r)
    {
        for (std::size_t s = 0; s < src.size(); ++s)
        {
            if (chebyshev(recv[r], src[s]) <= 1) out[r].push_back(std::uint32_t(s));
        }
    }
    return out;
}

inline std::vector<std::vector<std::uint32_t>> stencil_lists(int level, const std::vector<std::uint64_t>& sources,
                                                             const std::vector<std::uint64_t>& receivers)
{
    std::vector<std::vector<std::uint32_t>> out(receivers.size());
    if (level < 2) return out;
    auto src = cells_of(level, sources), recv = cells_of(level, receivers);
    for (std::size_t r = 0; r < recv.size(); ++r)
    {
        Cell pr = up(recv[r]);
        for (std::size_t s = 0; s < src.size(); ++s)
        {
            if (chebyshev(pr, up(src[s])) <= 1 && chebyshev(recv[r], src[s]) > 1) out[r].push_back(std::uint32_t(s));
        }
    }
    return out;
}

inline std::vector<double> direct(std::span<const fmmds::ChargedPoint> sources, std::span<const fmmds::Point3> ys)
{
    std::vector<double> out(ys.size(), 0.0);
    for (std::size_t j = 0; j < ys.size(); ++j)
    {
        for (const auto& s : sources)
        {
            double dx = ys[j].x - s.position.x, dy = ys[j].y - s.position.y, dz = ys[j].z - s.position.z;
            double r  = std::sqrt(dx * dx + dy * dy + dz * dz);
            if (r > 0) out[j] += s.q / r;
        }
    }
    return out;
}

inline double relative_rms(std::span<const double> got, std::span<const double> want)
{
    double num = 0, den = 0;
    for (std::size_t i = 0; i < got.size(); ++i)
    {
        num += (got[i] - want[i]) * (got[i] - want[i]);
        den += want[i] * want[i];
    }
    return std::sqrt(num / den);
}

// elementwise max |a - b| / |b|
inline double max_relative(std::span<const double> got, std::span<const double> want)
{
    double m = 0;
    for (std::size_t i = 0; i < got.size(); ++i)
    {
        double d = std::abs(got[i] - want[i]);
        m        = std::max(m, want[i] != 0 ? d / std::abs(want[i]) : d);
    }
    return m;
}

// node ids owning some level-l_par descendant of (level, box), from the plan's ranges
inline std::set<int> owner_nodes(const fmmds::PartitionPlan& plan, int level, std::uint64_t box)
{
    std::uint64_t lo, hi;
    if (level >= plan.l_par)
    {
        lo = box >> (3 * (level - plan.l_par));
        hi = lo + 1;
    }
    else
    {
        lo = box << (3 * (plan.l_par - level));
        hi = (box + 1) << (3 * (plan.l_par - level));
    }
    std::set<int> nodes;
    for (int u = 0; u < plan.num_units(); ++u)
    {
        const auto& r = plan.ranges[u];
        if (r.begin < hi && lo < r.end) nodes.insert(u / plan.units_per_node);
    }
    return nodes;
}

// box type as an int matching fmmds::BoxType, evaluated literally from the membership rules
inline int box_type(const fmmds::PartitionPlan& plan, int node, int level, std::uint64_t box)
{
    enum { domestic, exported, imported, root, other };
    if (level < plan.l_crit) return domestic;
    auto owners = owner_nodes(plan, level, box);
    if (level == plan.l_crit)
    {
        if (!owners.count(node)) return imported;
        if (owners.size() > 1) return root;
        return plan.nodes > 1 ? exported : domestic;
    }
    int  mine    = *owners.begin();
    bool offSeen = false, onSeen = false;
    // predicate candidates: the 7x7x7 window around the box covers every parent-neighbor child
    Cell         c = cell_of(level, box);
    std::int64_t n = std::int64_t(1) << level;
    for (std::int64_t z = std::max<std::int64_t>(0, c.z - 3); z <= std::min(n - 1, c.z + 3); ++z)
        for (std::int64_t y = std::max<std::int64_t>(0, c.y - 3); y <= std::min(n - 1, c.y + 3); ++y)
            for (std::int64_t x = std::max<std::int64_t>(0, c.x - 3); x <= std::min(n - 1, c.x + 3); ++x)
            {
                std::uint64_t q = interleave(level, x, y, z);
                if (!well_separated_child(level, box, q)) continue;
                (*owner_nodes(plan, level, q).begin() == node ? onSeen : offSeen) = true;
            }
    if (mine == node) return offSeen ? exported : domestic;
    return onSeen ? imported : other;
}

} // namespace oracle
