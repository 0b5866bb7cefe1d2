#include "fmmds/workload.hpp"

#include "fmmds/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace fmmds
{

Distribution parse_distribution(std::string_view name)
{
    if (name == "uniform") return Distribution::uniform;
    if (name == "sphere") return Distribution::sphere;
    throw DomainError("unknown distribution '" + std::string(name) + "'");
}

std::string_view to_string(Distribution d) { return d == Distribution::uniform ? "uniform" : "sphere"; }

PointStream::PointStream(std::uint64_t seed, std::uint32_t stream)
{
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), stream};
    engine_.seed(seq);
}

double PointStream::unit() { return double(engine_() >> 11) * 0x1.0p-53; }

std::vector<Point3> generate_points(std::size_t n, Distribution d, std::uint64_t seed, std::uint32_t stream)
{
    PointStream         rng(seed, stream);
    std::vector<Point3> out(n);
    for (auto& p : out)
    {
        if (d == Distribution::uniform)
        {
            p.x = rng.unit();
            p.y = rng.unit();
            p.z = rng.unit();
        }
        else
        {
            double z   = 2 * rng.unit() - 1;
            double phi = 2 * std::numbers::pi * rng.unit();
            double rho = std::sqrt(std::max(0.0, 1 - z * z));
            p.x        = 0.5 + kSphereRadius * rho * std::cos(phi);
            p.y        = 0.5 + kSphereRadius * rho * std::sin(phi);
            p.z        = 0.5 + kSphereRadius * z;
        }
    }
    return out;
}

Workload generate(std::size_t n_sources, std::size_t n_receivers, Distribution d, std::uint64_t seed)
{
    Workload w;
    auto     pos = generate_points(n_sources, d, seed, kSourcePositions);
    PointStream charges(seed, kSourceCharges);
    w.sources.resize(n_sources);
    for (std::size_t i = 0; i < n_sources; ++i)
    {
        w.sources[i] = {pos[i], 2 * charges.unit() - 1};
    }
    w.receivers = generate_points(n_receivers, d, seed, kReceiverPositions);
    return w;
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed)
{
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        idx[i] = i;
    }
    if (k >= n) return idx;
    // partial Fisher-Yates with explicit draws so the sample is platform independent
    PointStream rng(seed, kOracleSample);
    for (std::size_t i = 0; i < k; ++i)
    {
        std::size_t j = i + std::size_t(rng.bits() % (n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

} // namespace fmmds
