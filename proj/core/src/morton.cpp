#include "fmmds/morton.hpp"

#include "fmmds/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace fmmds
{

namespace
{

//! Spread the low 21 bits of v so that bit k lands on bit 3k.
std::uint64_t spread_bits(std::uint64_t v)
{
    v &= 0x1fffff;
    v = (v | v << 32) & 0x001f00000000ffffull;
    v = (v | v << 16) & 0x001f0000ff0000ffull;
    v = (v | v << 8) & 0x100f00f00f00f00full;
    v = (v | v << 4) & 0x10c30c30c30c30c3ull;
    v = (v | v << 2) & 0x1249249249249249ull;
    return v;
}

std::uint32_t compact_bits(std::uint64_t v)
{
    v &= 0x1249249249249249ull;
    v = (v ^ (v >> 2)) & 0x10c30c30c30c30c3ull;
    v = (v ^ (v >> 4)) & 0x100f00f00f00f00full;
    v = (v ^ (v >> 8)) & 0x001f0000ff0000ffull;
    v = (v ^ (v >> 16)) & 0x001f00000000ffffull;
    v = (v ^ (v >> 32)) & 0x1fffffull;
    return std::uint32_t(v);
}

void check_level(int level)
{
    if (level < 0) { throw DomainError("negative octree level " + std::to_string(level)); }
    if (level > kMaxLevel)
    {
        throw CapacityError("octree level " + std::to_string(level) + " exceeds the maximum of " +
                            std::to_string(kMaxLevel));
    }
}

void check_key(const MortonKey& key)
{
    check_level(key.level);
    if (key.index >= boxes_at_level(key.level))
    {
        throw DomainError("Morton index " + std::to_string(key.index) + " out of range at level " +
                          std::to_string(key.level));
    }
}

std::uint32_t cell_of(double v, int level)
{
    double       scaled = v * double(grid_width(level));
    std::int64_t cell   = std::int64_t(std::floor(scaled));
    std::int64_t max    = std::int64_t(grid_width(level)) - 1;
    return std::uint32_t(std::clamp<std::int64_t>(cell, 0, max));
}

} // namespace

MortonKey interleave(const BoxCoords& coords)
{
    check_level(coords.level);
    std::uint32_t w = grid_width(coords.level);
    if (coords.ix >= w || coords.iy >= w || coords.iz >= w)
    {
        throw DomainError("box coordinates outside the level-" + std::to_string(coords.level) + " grid");
    }
    std::uint64_t index = spread_bits(coords.ix) | spread_bits(coords.iy) << 1 | spread_bits(coords.iz) << 2;
    return {coords.level, index};
}

BoxCoords deinterleave(const MortonKey& key)
{
    check_key(key);
    return {key.level, compact_bits(key.index), compact_bits(key.index >> 1), compact_bits(key.index >> 2)};
}

MortonKey box_index_of_point(const Point3& p, int level)
{
    check_level(level);
    if (!(p.x >= 0 && p.x <= 1 && p.y >= 0 && p.y <= 1 && p.z >= 0 && p.z <= 1))
    {
        throw DomainError("point outside the unit cube");
    }
    return interleave({level, cell_of(p.x, level), cell_of(p.y, level), cell_of(p.z, level)});
}

double box_width(int level) { return 1.0 / double(grid_width(level)); }

Point3 box_center(const MortonKey& key)
{
    BoxCoords c = deinterleave(key);
    double    h = box_width(key.level);
    return {(c.ix + 0.5) * h, (c.iy + 0.5) * h, (c.iz + 0.5) * h};
}

MortonKey parent(const MortonKey& key)
{
    check_key(key);
    if (key.level == 0) { throw DomainError("the root box has no parent"); }
    return {key.level - 1, key.index >> 3};
}

MortonKey ancestor(const MortonKey& key, int level)
{
    check_key(key);
    if (level < 0 || level > key.level) { throw DomainError("ancestor level must lie in [0, key level]"); }
    return {level, key.index >> (3 * (key.level - level))};
}

std::array<MortonKey, 8> children(const MortonKey& key)
{
    check_key(key);
    if (key.level >= kMaxLevel) { throw CapacityError("children of a box at the maximum level"); }
    std::array<MortonKey, 8> out;
    for (unsigned j = 0; j < 8; ++j)
    {
        out[j] = {key.level + 1, (key.index << 3) + j};
    }
    return out;
}

std::vector<MortonKey> e2_neighbors(const MortonKey& key)
{
    check_key(key);
    std::vector<MortonKey> out;
    out.reserve(27);
    for_each_e2_neighbor(key, [&](std::uint64_t idx) { out.push_back({key.level, idx}); });
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<MortonKey> e4_neighbors(const MortonKey& key)
{
    check_key(key);
    std::vector<MortonKey> out;
    out.reserve(189);
    for_each_e4_neighbor(key, [&](std::uint64_t idx, int, int, int) { out.push_back({key.level, idx}); });
    std::sort(out.begin(), out.end());
    return out;
}

bool is_e2_neighbor(const MortonKey& a, const MortonKey& b)
{
    if (a.level != b.level) return false;
    BoxCoords ca = deinterleave(a);
    BoxCoords cb = deinterleave(b);
    auto      d  = [](std::uint32_t u, std::uint32_t v) { return u > v ? u - v : v - u; };
    return d(ca.ix, cb.ix) <= 1 && d(ca.iy, cb.iy) <= 1 && d(ca.iz, cb.iz) <= 1;
}

bool is_e4_neighbor(const MortonKey& a, const MortonKey& b)
{
    if (a.level != b.level || a.level < 2) return false;
    return is_e2_neighbor(parent(a), parent(b)) && !is_e2_neighbor(a, b);
}

BoundingBox bounding_box(std::span<const Point3> points)
{
    constexpr double inf = std::numeric_limits<double>::infinity();
    BoundingBox      box{{inf, inf, inf}, {-inf, -inf, -inf}};
    for (const auto& p : points)
    {
        box.lo = {std::min(box.lo.x, p.x), std::min(box.lo.y, p.y), std::min(box.lo.z, p.z)};
        box.hi = {std::max(box.hi.x, p.x), std::max(box.hi.y, p.y), std::max(box.hi.z, p.z)};
    }
    return box;
}

std::vector<Point3> normalize_to_unit_cube(std::span<const Point3> points)
{
    std::vector<Point3> out(points.begin(), points.end());
    if (points.empty()) return out;

    BoundingBox box    = bounding_box(points);
    double      extent = std::max({box.hi.x - box.lo.x, box.hi.y - box.lo.y, box.hi.z - box.lo.z});
    if (!std::isfinite(extent)) { throw DomainError("non-finite point coordinates"); }
    // the (1 - 2^-40) factor keeps the largest coordinate strictly below 1
    double scale = extent > 0 ? (1.0 - 0x1p-40) / extent : 0.0;
    for (auto& p : out)
    {
        p = {(p.x - box.lo.x) * scale, (p.y - box.lo.y) * scale, (p.z - box.lo.z) * scale};
    }
    return out;
}

} // namespace fmmds
