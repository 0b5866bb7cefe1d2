/*! @file
 * @brief Seeded point-set generation
 *
 * Each array draws from its own std::mt19937_64 stream seeded with
 * std::seed_seq{seed low 32 bits, seed high 32 bits, stream id}; reals are the top 53 bits
 * of a draw scaled by 2^-53. Both the engine and the seeding are fixed by the C++
 * standard, so a seed reproduces the same points on every platform.
 */
#pragma once

#include "fmmds/morton.hpp"

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace fmmds
{

enum class Distribution
{
    uniform, //!< i.i.d. in the unit cube
    sphere,  //!< uniform on the sphere of radius 0.45 centred at (0.5, 0.5, 0.5)
};

Distribution parse_distribution(std::string_view name);
std::string_view to_string(Distribution d);

inline constexpr double kSphereRadius = 0.45;

enum Stream : std::uint32_t
{
    kSourcePositions  = 0,
    kSourceCharges    = 1,
    kReceiverPositions = 2,
    kOracleSample     = 3,
};

class PointStream
{
public:
    PointStream(std::uint64_t seed, std::uint32_t stream);

    //! Uniform in [0, 1).
    double unit();
    std::uint64_t bits() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

std::vector<Point3> generate_points(std::size_t n, Distribution d, std::uint64_t seed, std::uint32_t stream);

struct Workload
{
    std::vector<ChargedPoint> sources;
    std::vector<Point3>       receivers;
};

//! Charges are uniform in [-1, 1).
Workload generate(std::size_t n_sources, std::size_t n_receivers, Distribution d, std::uint64_t seed);

//! k distinct indices of [0, n) in ascending order (all of them when k >= n).
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed);

} // namespace fmmds
