/*! @file
 * @brief Two-level (node x accelerator) partition of the octree by receiver load
 *
 * The level-l_par boxes are cut into contiguous Morton ranges, one per compute unit.
 * Unit u = node * units_per_node + local index, so a node's units are adjacent ranges.
 */
#pragma once

#include "fmmds/container.hpp"
#include "fmmds/morton.hpp"
#include "fmmds/pseudosort.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace fmmds
{

//! Receiver counts of the non-empty finest-level boxes.
struct ReceiverLoad
{
    int                        level{0};
    std::vector<std::uint64_t> boxes; //!< strictly increasing
    std::vector<Count>         counts;

    std::uint64_t total() const;

    static ReceiverLoad from_sorted(const SortedPointSet<Point3>& receivers);
    static ReceiverLoad from_points(std::span<const Point3> receivers, int level);
};

//! Dense receiver counts at one level.
struct LoadVector
{
    int                        level{0};
    std::vector<std::uint64_t> counts;
};

LoadVector load_at_level(const ReceiverLoad& load, int level);

struct UnitRange
{
    std::uint64_t begin{0}; //!< first level-l_par box
    std::uint64_t end{0};   //!< one past the last
    std::uint64_t load{0};

    friend bool operator==(const UnitRange&, const UnitRange&) = default;
};

struct PartitionPlan
{
    int                    nodes{1};
    int                    units_per_node{1};
    int                    l_par{2};
    int                    l_crit{2};
    bool                   balanced{true};
    double                 imbalance{1.0}; //!< max range load / mean range load
    std::vector<Count>     box_proc_id;    //!< level-l_par box -> unit
    std::vector<UnitRange> ranges;         //!< indexed by unit

    int num_units() const { return nodes * units_per_node; }
    int node_of_unit(int unit) const { return unit / units_per_node; }

    friend bool operator==(const PartitionPlan&, const PartitionPlan&) = default;
};

inline int critical_level(int l_par) { return l_par - 1 > 2 ? l_par - 1 : 2; }

struct PartitionOptions
{
    double balance_tolerance{0.2};
};

/*! @brief Cut the level-`level` loads into numUnits contiguous ranges
 *
 * Each cut lands on the box boundary whose prefix load is closest to u * total / numUnits;
 * on a tie the straddling box stays with the earlier range.
 */
std::vector<UnitRange> greedy_cut(const LoadVector& load, int numUnits);

/*! @brief Balanced plan: start at l_par = 2 and deepen until max load <= (1 + tol) * mean
 *
 * Returns the first balanced plan, or the best one found (flagged unbalanced) once l_par
 * reaches the finest level. Throws InfeasiblePartitionError when there are more units than
 * non-empty finest-level receiver boxes, DomainError for load levels below 2.
 */
PartitionPlan choose_partition(const ReceiverLoad& load, int nodes, int units_per_node,
                               const PartitionOptions& options = {});

//! Plan with explicit range boundaries (cuts.size() == units - 1, non-decreasing).
PartitionPlan plan_from_cuts(int nodes, int units_per_node, int l_par, std::span<const std::uint64_t> cuts);

struct Owners
{
    int first_unit{0};
    int last_unit{0};
    int first_node{0};
    int last_node{0};

    bool single_unit() const { return first_unit == last_unit; }
};

/*! @brief Units owning a box
 *
 * At or below the partition level this is one unit; above it, the contiguous range of
 * units owning the box's level-l_par descendants.
 */
Owners owner_of(const MortonKey& key, const PartitionPlan& plan);

//! Owning unit of a box at level >= l_par.
int unit_of(const MortonKey& key, const PartitionPlan& plan);
int node_of(const MortonKey& key, const PartitionPlan& plan);

struct UnitPoints
{
    std::vector<ChargedPoint> sources;
    std::vector<Count>        source_ids;   //!< original source positions
    std::vector<std::uint8_t> source_owned; //!< 1 if the unit owns the source's box, 0 for halo copies
    std::vector<Point3>       receivers;
    std::vector<Count>        receiver_ids;
};

struct ScatterCounters
{
    std::uint64_t receivers_moved{0};
    std::uint64_t sources_moved{0};
    std::uint64_t halo_copies{0};
    std::uint64_t bytes_moved{0};
};

struct ScatterResult
{
    std::vector<UnitPoints> units;
    ScatterCounters         counters;
};

/*! @brief Deliver every receiver to its owner and every source to its owner plus halo units
 *
 * A source is copied to each unit owning a non-empty receiver box whose E2 neighborhood at
 * l_max contains the source's box. Point i is assumed to start on node i mod nodes; the
 * counters record deliveries that cross nodes. Relative input order is preserved per unit.
 */
ScatterResult scatter_points(std::span<const ChargedPoint> sources, std::span<const Point3> receivers,
                             const PartitionPlan& plan, int l_max, unsigned workers = 0);

ContainerSection plan_section(const PartitionPlan& plan);
PartitionPlan    plan_from_section(const ContainerSection& section);

} // namespace fmmds
