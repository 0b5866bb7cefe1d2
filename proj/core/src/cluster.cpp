#include "fmmds/cluster.hpp"

#include "fmmds/errors.hpp"
#include "fmmds/parallel.hpp"

#include <string>

namespace fmmds
{

namespace
{

void finish_tally(const std::vector<std::uint32_t>& counts, std::uint64_t& total, std::uint64_t& dup,
                  std::uint64_t& missing)
{
    for (std::uint32_t c : counts)
    {
        total += 1;
        if (c == 0) { ++missing; }
        if (c > 1) { dup += c - 1; }
    }
}

} // namespace

UpwardResult run_distributed_upward(const FmmStructures& global, std::span<const ChargedPoint> sources,
                                    std::span<const Point3> receivers, const DistributedOptions& options)
{
    const auto& dir = global.directory;
    const int   L   = global.l_max;
    if (L < 2) { throw DomainError("distributed evaluation needs l_max >= 2"); }
    if (sources.size() != global.sources.points.size() || receivers.size() != global.receivers.points.size())
    {
        throw DomainError("point sets differ from the ones the structures were built on");
    }

    UpwardResult up;
    up.plan = options.plan ? *options.plan
                           : choose_partition(ReceiverLoad::from_sorted(global.receivers), options.nodes,
                                              options.units_per_node, options.partition);
    const auto& plan = up.plan;
    if (plan.l_par > L) { throw DomainError("partition level deeper than l_max"); }
    const int P  = plan.nodes;
    const int lc = plan.l_crit;

    up.scatter = scatter_points(sources, receivers, plan, L, options.workers);
    up.typed.resize(P);
    for (int J = 0; J < P; ++J)
    {
        up.typed[J] = classify(J, dir, plan, {options.workers, options.shuffle_seed});
    }

    FmmOperators                            ops(options.p);
    const std::size_t                       B = ops.block();
    std::vector<std::uint32_t>              p2mTally(sources.size(), 0);
    std::vector<std::vector<std::uint32_t>> m2mTally(L + 1);
    for (int l = lc + 1; l <= L; ++l)
    {
        m2mTally[l].assign(dir.sources[l].size(), 0);
    }

    SortOptions sortDet{SortMode::deterministic, options.workers};
    for (int J = 0; J < P; ++J)
    {
        NodeState node = NodeState::empty(J, dir, ops);

        // P2M over the sources this node owns; halo copies only feed the near field
        for (int u = J * plan.units_per_node; u < (J + 1) * plan.units_per_node; ++u)
        {
            const UnitPoints&         unit = up.scatter.units[u];
            std::vector<ChargedPoint> owned;
            std::vector<Count>        ownedIds;
            for (std::size_t k = 0; k < unit.sources.size(); ++k)
            {
                if (unit.source_owned[k])
                {
                    owned.push_back(unit.sources[k]);
                    ownedIds.push_back(unit.source_ids[k]);
                }
            }
            auto sorted = pseudo_sort<ChargedPoint>(owned, L, sortDet);
            for (std::size_t i = 0; i < sorted.num_boxes(); ++i)
            {
                auto rank = dir.sources[L].rank_of(sorted.non_empty_index[i]);
                if (!rank) { throw DomainError("unit source box missing from the global directory"); }
                ops.p2m(sorted.box_points(i), box_center({L, sorted.non_empty_index[i]}), node.m[L].data() + *rank * B);
                node.state[L][*rank] = BoxState::complete;
                for (std::size_t j = sorted.box_begin(i); j < sorted.box_end(i); ++j)
                {
                    ++p2mTally[ownedIds[sorted.permutation[j]]];
                }
            }
        }

        // M2M up to l_crit over present children; a parent is complete iff all its children are here
        for (int c = L; c > lc; --c)
        {
            std::vector<std::uint8_t> present(dir.sources[c].size());
            for (std::size_t i = 0; i < present.size(); ++i)
            {
                present[i] = node.state[c][i] != BoxState::absent;
            }
            std::vector<std::uint32_t> local(present.size(), 0);
            m2m_level(dir, c, ops, node.m, &present, &local, options.workers);
            for (std::size_t i = 0; i < local.size(); ++i)
            {
                m2mTally[c][i] += local[i];
            }
            auto ranges = child_ranges(dir.sources[c], dir.sources[c - 1].size());
            for (std::size_t j = 0; j + 1 < ranges.size(); ++j)
            {
                std::size_t have = 0;
                for (Count k = ranges[j]; k < ranges[j + 1]; ++k)
                {
                    have += present[k];
                }
                if (have == 0) continue;
                node.state[c - 1][j] = have == ranges[j + 1] - ranges[j] ? BoxState::complete : BoxState::partial;
            }
        }
        up.nodes.push_back(std::move(node));
    }

    DataManager manager(dir, plan, options.p);
    manager.run_upward_exchange(up.nodes, up.typed);
    up.ledger = manager.meter();

    // every level-l_crit box is now complete everywhere; finish the upward pass locally
    for (auto& node : up.nodes)
    {
        for (std::size_t i = 0; i < node.state[lc].size(); ++i)
        {
            if (node.state[lc][i] != BoxState::complete)
            {
                throw RoutingError("node " + std::to_string(node.node) + " lacks complete data for level-" +
                                   std::to_string(lc) + " box " + std::to_string(dir.sources[lc].index[i]));
            }
        }
        for (int c = lc; c > 2; --c)
        {
            m2m_level(dir, c, ops, node.m, nullptr, nullptr, options.workers);
            node.state[c - 1].assign(node.state[c - 1].size(), BoxState::complete);
        }
    }

    finish_tally(p2mTally, up.tally.p2m_points, up.tally.p2m_duplicates, up.tally.p2m_missing);
    for (int l = lc + 1; l <= L; ++l)
    {
        finish_tally(m2mTally[l], up.tally.m2m_children, up.tally.m2m_duplicates, up.tally.m2m_missing);
    }
    return up;
}

DownwardResult run_downward_redistribution(const FmmStructures& global, const UpwardResult& up,
                                           std::size_t numReceivers, const DistributedOptions& options)
{
    const auto&       dir  = global.directory;
    const auto&       plan = up.plan;
    const int         L    = global.l_max;
    FmmOperators      ops(options.p);
    const std::size_t B = ops.block();

    DownwardResult out;
    out.potentials.assign(numReceivers, 0.0);
    SortOptions sortDet{SortMode::deterministic, options.workers};

    for (int J = 0; J < plan.nodes; ++J)
    {
        const NodeState& node = up.nodes[J];

        // receiver boxes this node finishes: its own below l_par, shared ancestors above
        std::vector<std::vector<std::uint8_t>> active(L + 1);
        for (int l = 2; l <= L; ++l)
        {
            const auto& recv = dir.receivers[l];
            active[l].assign(recv.size(), 0);
            for (std::size_t r = 0; r < recv.size(); ++r)
            {
                Owners o     = owner_of({l, recv.index[r]}, plan);
                active[l][r] = J >= o.first_node && J <= o.last_node;
            }
            for (std::size_t r = 0; r < recv.size(); ++r)
            {
                if (!active[l][r]) continue;
                for (Count v : global.stencils.levels[l].segment(r))
                {
                    if (node.state[l][v] != BoxState::complete)
                    {
                        throw RoutingError("node " + std::to_string(J) + " lacks M-data for source box " +
                                           std::to_string(dir.sources[l].index[v]) + " at level " +
                                           std::to_string(l));
                    }
                }
            }
        }
        LevelCoefficients loc = allocate_coefficients(dir.receivers, ops);
        downward_pass(dir, global.stencils, ops, node.m, loc, &active, options.workers);

        for (int u = J * plan.units_per_node; u < (J + 1) * plan.units_per_node; ++u)
        {
            const UnitPoints& unit = up.scatter.units[u];
            if (unit.receivers.empty()) continue;
            auto uRecv = pseudo_sort<Point3>(unit.receivers, L, sortDet);
            auto uSrc  = pseudo_sort<ChargedPoint>(unit.sources, L, sortDet);
            auto rankMap   = DenseRankMap::from_non_empty(L, uSrc.non_empty_index, options.workers);
            auto neighbors = build_neighbor_table(rankMap, uRecv.non_empty_index, options.workers);
            out.redistributed_bytes += uRecv.num_boxes() * 8 * std::uint64_t(options.p) * options.p;

            std::vector<double> sorted(uRecv.points.size(), 0.0);
            parallel_for(uRecv.num_boxes(), options.workers, [&](std::size_t i) {
                near_field_box(neighbors, uSrc, uRecv, i, sorted.data());
                auto rank = dir.receivers[L].rank_of(uRecv.non_empty_index[i]);
                ops.l2p(loc[L].data() + *rank * B, box_center({L, uRecv.non_empty_index[i]}), uRecv.box_points(i),
                        sorted.data() + uRecv.box_begin(i));
            });
            for (std::size_t j = 0; j < sorted.size(); ++j)
            {
                out.potentials[unit.receiver_ids[uRecv.permutation[j]]] = sorted[j];
            }
        }
    }
    return out;
}

DistributedResult evaluate_distributed(const FmmStructures& global, std::span<const ChargedPoint> sources,
                                       std::span<const Point3> receivers, const DistributedOptions& options)
{
    DistributedResult res;
    res.upward              = run_distributed_upward(global, sources, receivers, options);
    DownwardResult down     = run_downward_redistribution(global, res.upward, receivers.size(), options);
    res.potentials          = std::move(down.potentials);
    res.redistributed_bytes = down.redistributed_bytes;
    return res;
}

} // namespace fmmds
