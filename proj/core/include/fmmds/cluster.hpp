/*! @file
 * @brief In-process simulation of a multi-node, multi-unit FMM run
 *
 * The global level directory and stencils stand in for the merged non-empty box arrays
 * every node holds. Points are scattered to units, each node builds M-data for the boxes it
 * owns, the data manager completes EXPORT/IMPORT/ROOT data, and every unit finishes its
 * receivers with L2P plus its own near field.
 */
#pragma once

#include "fmmds/boxtype.hpp"
#include "fmmds/exchange.hpp"
#include "fmmds/fmm.hpp"
#include "fmmds/partition.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace fmmds
{

struct DistributedOptions
{
    int                          nodes{1};
    int                          units_per_node{1};
    int                          p{8};
    PartitionOptions             partition;
    std::optional<PartitionPlan> plan; //!< overrides choose_partition
    unsigned                     workers{0};
    std::optional<std::uint64_t> shuffle_seed; //!< passed to classify
};

//! Per-item contribution counts summed over all nodes.
struct TranslationTally
{
    std::uint64_t p2m_points{0};
    std::uint64_t p2m_duplicates{0};
    std::uint64_t p2m_missing{0};
    std::uint64_t m2m_children{0}; //!< child boxes at levels l_crit+1..l_max
    std::uint64_t m2m_duplicates{0};
    std::uint64_t m2m_missing{0};

    bool exactly_once() const
    {
        return p2m_duplicates == 0 && p2m_missing == 0 && m2m_duplicates == 0 && m2m_missing == 0;
    }
};

struct UpwardResult
{
    PartitionPlan             plan;
    ScatterResult             scatter;
    std::vector<TypedBoxList> typed;
    std::vector<NodeState>    nodes; //!< complete M-data at every level each node uses
    TrafficLedger             ledger;
    TranslationTally          tally;
};

/*! @brief Scatter, per-node P2M/M2M up to l_crit, upward exchange, then M2M down to level 2
 *
 * global must be built over the same sources and receivers with l_max >= 2.
 */
UpwardResult run_distributed_upward(const FmmStructures& global, std::span<const ChargedPoint> sources,
                                    std::span<const Point3> receivers, const DistributedOptions& options);

struct DownwardResult
{
    std::vector<double> potentials;          //!< original receiver order
    std::uint64_t       redistributed_bytes{0}; //!< L-data handed from nodes to their units
};

/*! @brief Per-node M2L/L2L, then per-unit L2P and near field, written back in input order */
DownwardResult run_downward_redistribution(const FmmStructures& global, const UpwardResult& upward,
                                           std::size_t numReceivers, const DistributedOptions& options);

struct DistributedResult
{
    std::vector<double> potentials;
    UpwardResult        upward;
    std::uint64_t       redistributed_bytes{0};
};

DistributedResult evaluate_distributed(const FmmStructures& global, std::span<const ChargedPoint> sources,
                                       std::span<const Point3> receivers, const DistributedOptions& options);

} // namespace fmmds
