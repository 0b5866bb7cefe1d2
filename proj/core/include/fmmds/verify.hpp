/*! @file
 * @brief Brute-force checks of built structures, used by the command-line verify mode
 */
#pragma once

#include "fmmds/boxtype.hpp"
#include "fmmds/lists.hpp"
#include "fmmds/partition.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fmmds
{

struct CheckResult
{
    std::string name;
    std::string metric;
    double      value{0};
    bool        pass{false};
};

//! Every (receiver, source) box pair tested with the E2 predicate; value = wrong segments.
CheckResult check_neighbor_table(const FmmStructures& s);

//! Every pair per level tested with the E4 predicate; value = wrong segments.
CheckResult check_translation_stencils(const FmmStructures& s);

/*! @brief Each finest-level (source, receiver) box pair is reached exactly once
 *
 * Exhaustive when 8^l_max <= exhaustive_limit, otherwise over `sample` receiver boxes.
 * value = pairs reached zero or several times.
 */
CheckResult check_coverage(const FmmStructures& s, std::uint64_t seed, std::uint64_t exhaustive_limit = 4096,
                           std::size_t sample = 256);

//! Bijective permutation, grouping by box, bookmark widths equal to bin counts.
CheckResult check_pseudosort(std::span<const ChargedPoint> input, const SortedPointSet<ChargedPoint>& sorted);

//! Deterministic builds with 1, 2 and 3 workers are identical.
CheckResult check_worker_invariance(std::span<const ChargedPoint> sources, std::span<const Point3> receivers,
                                    int l_max);

//! Each receiver's near + far pathway count equals the source count.
CheckResult check_pathways(const FmmStructures& s);

//! classify() equals direct predicate evaluation on every node, also with shuffled order.
CheckResult check_boxtypes(const LevelDirectory& dir, const PartitionPlan& plan, std::uint64_t seed);

std::vector<CheckResult> run_structure_checks(std::span<const ChargedPoint> sources, std::span<const Point3> receivers,
                                              const FmmStructures& s, std::uint64_t seed);

} // namespace fmmds
