/*! @file
 * @brief Morton (Z-order) box indexing on a uniform octree over the unit cube
 *
 * Box indices interleave the bits of the integer grid coordinates. Each octal digit is
 * (iz << 2) | (iy << 1) | ix, with the coarsest level in the most significant digit, so
 * parent/child relations are plain shifts by 3 bits.
 */
#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <vector>

namespace fmmds
{

inline constexpr int kMaxLevel = 20;

struct Point3
{
    double x{0};
    double y{0};
    double z{0};

    friend bool operator==(const Point3&, const Point3&) = default;
};

struct ChargedPoint
{
    Point3 position;
    double q{0};

    friend bool operator==(const ChargedPoint&, const ChargedPoint&) = default;
};

inline const Point3& position_of(const Point3& p) { return p; }
inline const Point3& position_of(const ChargedPoint& p) { return p.position; }

struct BoxCoords
{
    int level{0};
    std::uint32_t ix{0};
    std::uint32_t iy{0};
    std::uint32_t iz{0};

    friend bool operator==(const BoxCoords&, const BoxCoords&) = default;
};

struct MortonKey
{
    int level{0};
    std::uint64_t index{0};

    friend bool operator==(const MortonKey&, const MortonKey&) = default;
    friend auto operator<=>(const MortonKey&, const MortonKey&) = default;
};

//! Number of boxes at a level, 8^level.
inline constexpr std::uint64_t boxes_at_level(int level) { return std::uint64_t(1) << (3 * level); }

//! Grid width at a level, 2^level.
inline constexpr std::uint32_t grid_width(int level) { return std::uint32_t(1) << level; }

MortonKey interleave(const BoxCoords& coords);
BoxCoords deinterleave(const MortonKey& key);

/*! @brief Box containing p at the given level
 *
 * Coordinates exactly on the upper face (== 1.0) clamp into the last box.
 */
MortonKey box_index_of_point(const Point3& p, int level);

Point3 box_center(const MortonKey& key);
double box_width(int level);

MortonKey parent(const MortonKey& key);
MortonKey ancestor(const MortonKey& key, int level);
std::array<MortonKey, 8> children(const MortonKey& key);

//! Same-level boxes within Chebyshev distance 1 (the box itself included), ascending index.
std::vector<MortonKey> e2_neighbors(const MortonKey& key);

//! Children of the parent's E2 set minus the box's own E2 set, ascending index. Empty below level 2.
std::vector<MortonKey> e4_neighbors(const MortonKey& key);

bool is_e2_neighbor(const MortonKey& a, const MortonKey& b);
bool is_e4_neighbor(const MortonKey& a, const MortonKey& b);

//! Calls f(index) for every E2 neighbor of key, in z-y-x offset order (not sorted).
template<class F>
void for_each_e2_neighbor(const MortonKey& key, F&& f)
{
    BoxCoords c   = deinterleave(key);
    auto      max = std::int64_t(grid_width(key.level)) - 1;
    for (int dz = -1; dz <= 1; ++dz)
    {
        std::int64_t z = std::int64_t(c.iz) + dz;
        if (z < 0 || z > max) continue;
        for (int dy = -1; dy <= 1; ++dy)
        {
            std::int64_t y = std::int64_t(c.iy) + dy;
            if (y < 0 || y > max) continue;
            for (int dx = -1; dx <= 1; ++dx)
            {
                std::int64_t x = std::int64_t(c.ix) + dx;
                if (x < 0 || x > max) continue;
                f(interleave({key.level, std::uint32_t(x), std::uint32_t(y), std::uint32_t(z)}).index);
            }
        }
    }
}

//! Calls f(index, dx, dy, dz) for every E4 neighbor of key; (dx, dy, dz) is the grid offset.
template<class F>
void for_each_e4_neighbor(const MortonKey& key, F&& f)
{
    if (key.level < 2) return;
    BoxCoords c   = deinterleave(key);
    auto      max = std::int64_t(grid_width(key.level)) - 1;
    // parent neighborhood spans [2*(c/2) - 2, 2*(c/2) + 3] per axis
    auto lo = [](std::uint32_t v) { return std::int64_t(v & ~1u) - 2; };
    for (std::int64_t z = std::max<std::int64_t>(0, lo(c.iz)); z <= std::min(max, lo(c.iz) + 5); ++z)
    {
        std::int64_t dz = z - c.iz;
        for (std::int64_t y = std::max<std::int64_t>(0, lo(c.iy)); y <= std::min(max, lo(c.iy) + 5); ++y)
        {
            std::int64_t dy = y - c.iy;
            for (std::int64_t x = std::max<std::int64_t>(0, lo(c.ix)); x <= std::min(max, lo(c.ix) + 5); ++x)
            {
                std::int64_t dx = x - c.ix;
                if (dx >= -1 && dx <= 1 && dy >= -1 && dy <= 1 && dz >= -1 && dz <= 1) continue;
                f(interleave({key.level, std::uint32_t(x), std::uint32_t(y), std::uint32_t(z)}).index, int(dx),
                  int(dy), int(dz));
            }
        }
    }
}

//! Axis-aligned bounding box of a point cloud.
struct BoundingBox
{
    Point3 lo;
    Point3 hi;
};

BoundingBox bounding_box(std::span<const Point3> points);

/*! @brief Map points into [0, 1)^3 with a single isotropic scale
 *
 * The longest bounding-box edge maps to slightly less than 1 so that no coordinate
 * reaches the upper face.
 */
std::vector<Point3> normalize_to_unit_cube(std::span<const Point3> points);

} // namespace fmmds
