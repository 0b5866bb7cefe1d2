#include "fmmds/partition.hpp"

#include "fmmds/errors.hpp"
#include "fmmds/parallel.hpp"

#include <algorithm>
#include <limits>
#include <optional>
#include <string>

namespace fmmds
{

std::uint64_t ReceiverLoad::total() const
{
    std::uint64_t t = 0;
    for (Count c : counts)
    {
        t += c;
    }
    return t;
}

ReceiverLoad ReceiverLoad::from_sorted(const SortedPointSet<Point3>& receivers)
{
    ReceiverLoad load;
    load.level = receivers.level;
    load.boxes = receivers.non_empty_index;
    load.counts.resize(receivers.num_boxes());
    for (std::size_t i = 0; i < receivers.num_boxes(); ++i)
    {
        load.counts[i] = Count(receivers.box_end(i) - receivers.box_begin(i));
    }
    return load;
}

ReceiverLoad ReceiverLoad::from_points(std::span<const Point3> receivers, int level)
{
    std::vector<std::uint64_t> boxes(receivers.size());
    for (std::size_t i = 0; i < receivers.size(); ++i)
    {
        boxes[i] = box_index_of_point(receivers[i], level).index;
    }
    std::sort(boxes.begin(), boxes.end());

    ReceiverLoad load;
    load.level = level;
    for (std::size_t i = 0; i < boxes.size();)
    {
        std::size_t j = i;
        while (j < boxes.size() && boxes[j] == boxes[i])
        {
            ++j;
        }
        load.boxes.push_back(boxes[i]);
        load.counts.push_back(Count(j - i));
        i = j;
    }
    return load;
}

LoadVector load_at_level(const ReceiverLoad& load, int level)
{
    if (level < 0 || level > load.level)
    {
        throw DomainError("load_at_level: level " + std::to_string(level) + " outside [0, " +
                          std::to_string(load.level) + "]");
    }
    LoadVector out;
    out.level = level;
    out.counts.assign(boxes_at_level(level), 0);
    int shift = 3 * (load.level - level);
    for (std::size_t i = 0; i < load.boxes.size(); ++i)
    {
        out.counts[load.boxes[i] >> shift] += load.counts[i];
    }
    return out;
}

std::vector<UnitRange> greedy_cut(const LoadVector& load, int numUnits)
{
    if (numUnits < 1) { throw DomainError("greedy_cut: need at least one unit"); }

    const std::size_t numBoxes = load.counts.size();
    std::vector<std::uint64_t> prefix(numBoxes + 1, 0);
    for (std::size_t b = 0; b < numBoxes; ++b)
    {
        prefix[b + 1] = prefix[b] + load.counts[b];
    }
    const std::uint64_t total = prefix.back();
    const auto          units = std::uint64_t(numUnits);

    // compare prefix * U against u * total in 128 bits to avoid rounding the target
    using Wide = unsigned __int128;
    auto dist  = [&](std::size_t k, std::uint64_t u) {
        Wide a = Wide(prefix[k]) * units;
        Wide t = Wide(u) * total;
        return a > t ? a - t : t - a;
    };

    std::vector<std::uint64_t> cut(numUnits + 1, 0);
    cut[numUnits] = numBoxes;
    std::size_t k = 0;
    for (int u = 1; u < numUnits; ++u)
    {
        // largest k with prefix[k] * U <= u * total
        while (k < numBoxes && Wide(prefix[k + 1]) * units <= Wide(std::uint64_t(u)) * total)
        {
            ++k;
        }
        std::size_t pick = k;
        if (k < numBoxes && dist(k + 1, u) <= dist(k, u)) { pick = k + 1; }
        cut[u] = pick;
        k      = pick;
    }

    std::vector<UnitRange> ranges(numUnits);
    for (int u = 0; u < numUnits; ++u)
    {
        ranges[u].begin = cut[u];
        ranges[u].end   = cut[u + 1];
        ranges[u].load  = prefix[cut[u + 1]] - prefix[cut[u]];
    }
    return ranges;
}

namespace
{

double imbalance_of(std::span<const UnitRange> ranges)
{
    std::uint64_t total = 0, max = 0;
    for (const auto& r : ranges)
    {
        total += r.load;
        max = std::max(max, r.load);
    }
    if (total == 0) { return 1.0; }
    return double(max) * double(ranges.size()) / double(total);
}

PartitionPlan make_plan(int nodes, int units_per_node, int l_par, std::vector<UnitRange> ranges)
{
    PartitionPlan plan;
    plan.nodes          = nodes;
    plan.units_per_node = units_per_node;
    plan.l_par          = l_par;
    plan.l_crit         = critical_level(l_par);
    plan.imbalance      = imbalance_of(ranges);
    plan.box_proc_id.assign(boxes_at_level(l_par), 0);
    for (std::size_t u = 0; u < ranges.size(); ++u)
    {
        for (std::uint64_t b = ranges[u].begin; b < ranges[u].end; ++b)
        {
            plan.box_proc_id[b] = Count(u);
        }
    }
    plan.ranges = std::move(ranges);
    return plan;
}

void check_counts(int nodes, int units_per_node)
{
    if (nodes < 1 || units_per_node < 1) { throw DomainError("node and unit counts must be positive"); }
}

} // namespace

PartitionPlan choose_partition(const ReceiverLoad& load, int nodes, int units_per_node, const PartitionOptions& options)
{
    check_counts(nodes, units_per_node);
    if (load.level < 2)
    {
        throw DomainError("partitioning needs l_max >= 2, got " + std::to_string(load.level));
    }
    const std::uint64_t units = std::uint64_t(nodes) * std::uint64_t(units_per_node);
    if (units > load.boxes.size())
    {
        throw InfeasiblePartitionError(std::to_string(nodes) + " nodes x " + std::to_string(units_per_node) +
                                       " units exceed the " + std::to_string(load.boxes.size()) +
                                       " non-empty receiver boxes at level " + std::to_string(load.level));
    }

    std::optional<PartitionPlan> best;
    for (int level = 2; level <= load.level; ++level)
    {
        LoadVector    dense = load_at_level(load, level);
        PartitionPlan plan  = make_plan(nodes, units_per_node, level, greedy_cut(dense, int(units)));
        if (plan.imbalance <= 1.0 + options.balance_tolerance)
        {
            plan.balanced = true;
            return plan;
        }
        if (!best || plan.imbalance < best->imbalance) { best = std::move(plan); }
    }
    best->balanced = false;
    return *best;
}

PartitionPlan plan_from_cuts(int nodes, int units_per_node, int l_par, std::span<const std::uint64_t> cuts)
{
    check_counts(nodes, units_per_node);
    if (l_par < 0 || l_par > kMaxLevel) { throw DomainError("plan_from_cuts: bad partition level"); }
    const int units = nodes * units_per_node;
    if (cuts.size() != std::size_t(units - 1)) { throw DomainError("plan_from_cuts: need units - 1 cuts"); }

    std::vector<UnitRange> ranges(units);
    std::uint64_t          prev = 0;
    for (int u = 0; u < units; ++u)
    {
        std::uint64_t end = u + 1 < units ? cuts[u] : boxes_at_level(l_par);
        if (end < prev || end > boxes_at_level(l_par)) { throw DomainError("plan_from_cuts: cuts not monotone"); }
        ranges[u] = {prev, end, 0};
        prev      = end;
    }
    PartitionPlan plan = make_plan(nodes, units_per_node, l_par, std::move(ranges));
    plan.imbalance     = 1.0;
    return plan;
}

Owners owner_of(const MortonKey& key, const PartitionPlan& plan)
{
    Owners o;
    if (key.level >= plan.l_par)
    {
        o.first_unit = o.last_unit = int(plan.box_proc_id[key.index >> (3 * (key.level - plan.l_par))]);
    }
    else
    {
        int shift    = 3 * (plan.l_par - key.level);
        o.first_unit = int(plan.box_proc_id[key.index << shift]);
        o.last_unit  = int(plan.box_proc_id[((key.index + 1) << shift) - 1]);
    }
    o.first_node = plan.node_of_unit(o.first_unit);
    o.last_node  = plan.node_of_unit(o.last_unit);
    return o;
}

int unit_of(const MortonKey& key, const PartitionPlan& plan)
{
    if (key.level < plan.l_par) { throw DomainError("unit_of: box above the partition level"); }
    return int(plan.box_proc_id[key.index >> (3 * (key.level - plan.l_par))]);
}

int node_of(const MortonKey& key, const PartitionPlan& plan) { return plan.node_of_unit(unit_of(key, plan)); }

ScatterResult scatter_points(std::span<const ChargedPoint> sources, std::span<const Point3> receivers,
                             const PartitionPlan& plan, int l_max, unsigned workers)
{
    if (l_max < plan.l_par) { throw DomainError("scatter_points: l_max below the partition level"); }
    const int units = plan.num_units();

    // non-empty receiver boxes at l_max
    std::vector<std::uint64_t> recvBoxes(receivers.size());
    parallel_for(receivers.size(), workers,
                 [&](std::size_t i) { recvBoxes[i] = box_index_of_point(receivers[i], l_max).index; });
    std::vector<std::uint64_t> occupied = recvBoxes;
    std::sort(occupied.begin(), occupied.end());
    occupied.erase(std::unique(occupied.begin(), occupied.end()), occupied.end());

    // destination units per distinct source box; the owner comes first
    std::vector<std::uint64_t> srcBoxes(sources.size());
    parallel_for(sources.size(), workers,
                 [&](std::size_t i) { srcBoxes[i] = box_index_of_point(sources[i].position, l_max).index; });
    std::vector<std::uint64_t> distinct = srcBoxes;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    std::vector<std::vector<int>> targets(distinct.size());
    parallel_for(distinct.size(), workers, [&](std::size_t d) {
        MortonKey key{l_max, distinct[d]};
        int       owner = unit_of(key, plan);
        auto&     t     = targets[d];
        t.push_back(owner);
        for_each_e2_neighbor(key, [&](std::uint64_t nb) {
            if (!std::binary_search(occupied.begin(), occupied.end(), nb)) return;
            int u = unit_of({l_max, nb}, plan);
            if (std::find(t.begin(), t.end(), u) == t.end()) t.push_back(u);
        });
        std::sort(t.begin() + 1, t.end());
    });
    auto targetsOf = [&](std::uint64_t box) -> const std::vector<int>& {
        return targets[std::lower_bound(distinct.begin(), distinct.end(), box) - distinct.begin()];
    };

    // per-chunk buffers concatenated in chunk order keep the input order inside each unit
    unsigned numChunks = std::max(1u, resolve_workers(workers));
    std::vector<std::vector<UnitPoints>> partial(numChunks, std::vector<UnitPoints>(units));
    std::vector<ScatterCounters>         partialCounters(numChunks);

    parallel_chunks(receivers.size(), numChunks, [&](std::size_t c, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i)
        {
            int u = unit_of({l_max, recvBoxes[i]}, plan);
            partial[c][u].receivers.push_back(receivers[i]);
            partial[c][u].receiver_ids.push_back(Count(i));
            if (plan.node_of_unit(u) != int(i % plan.nodes)) { ++partialCounters[c].receivers_moved; }
        }
    });
    parallel_chunks(sources.size(), numChunks, [&](std::size_t c, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i)
        {
            const auto& t      = targetsOf(srcBoxes[i]);
            int         origin = int(i % plan.nodes);
            for (std::size_t k = 0; k < t.size(); ++k)
            {
                auto& dst = partial[c][t[k]];
                dst.sources.push_back(sources[i]);
                dst.source_ids.push_back(Count(i));
                dst.source_owned.push_back(k == 0 ? 1 : 0);
                if (k > 0) { ++partialCounters[c].halo_copies; }
                if (plan.node_of_unit(t[k]) != origin) { ++partialCounters[c].sources_moved; }
            }
        }
    });

    ScatterResult out;
    out.units.resize(units);
    for (unsigned c = 0; c < numChunks; ++c)
    {
        for (int u = 0; u < units; ++u)
        {
            auto& dst = out.units[u];
            auto& src = partial[c][u];
            dst.sources.insert(dst.sources.end(), src.sources.begin(), src.sources.end());
            dst.source_ids.insert(dst.source_ids.end(), src.source_ids.begin(), src.source_ids.end());
            dst.source_owned.insert(dst.source_owned.end(), src.source_owned.begin(), src.source_owned.end());
            dst.receivers.insert(dst.receivers.end(), src.receivers.begin(), src.receivers.end());
            dst.receiver_ids.insert(dst.receiver_ids.end(), src.receiver_ids.begin(), src.receiver_ids.end());
        }
        out.counters.receivers_moved += partialCounters[c].receivers_moved;
        out.counters.sources_moved += partialCounters[c].sources_moved;
        out.counters.halo_copies += partialCounters[c].halo_copies;
    }
    out.counters.bytes_moved =
        out.counters.receivers_moved * sizeof(Point3) + out.counters.sources_moved * sizeof(ChargedPoint);
    return out;
}

ContainerSection plan_section(const PartitionPlan& plan)
{
    ByteWriter w;
    w.u32(std::uint32_t(plan.nodes));
    w.u32(std::uint32_t(plan.units_per_node));
    w.u32(std::uint32_t(plan.l_par));
    w.u32(std::uint32_t(plan.l_crit));
    w.u8(plan.balanced ? 1 : 0);
    w.f64(plan.imbalance);
    w.array_u32(plan.box_proc_id);
    w.array<UnitRange>(plan.ranges, [](ByteWriter& bw, const UnitRange& r) {
        bw.u64(r.begin);
        bw.u64(r.end);
        bw.u64(r.load);
    });
    return {ContainerSection::make_tag("PLAN"), w.release()};
}

PartitionPlan plan_from_section(const ContainerSection& section)
{
    if (section.tag != ContainerSection::make_tag("PLAN")) { throw FormatError("not a PLAN section"); }
    ByteReader    r(section.payload);
    PartitionPlan plan;
    plan.nodes          = int(r.u32());
    plan.units_per_node = int(r.u32());
    plan.l_par          = int(r.u32());
    plan.l_crit         = int(r.u32());
    plan.balanced       = r.u8() != 0;
    plan.imbalance      = r.f64();
    plan.box_proc_id    = r.array_u32();
    std::size_t n       = r.array_length(24);
    plan.ranges.resize(n);
    for (auto& range : plan.ranges)
    {
        range.begin = r.u64();
        range.end   = r.u64();
        range.load  = r.u64();
    }
    if (!r.at_end()) { throw FormatError("trailing bytes in PLAN section"); }
    if (plan.nodes < 1 || plan.units_per_node < 1 || plan.l_par > kMaxLevel ||
        plan.box_proc_id.size() != boxes_at_level(plan.l_par) || plan.ranges.size() != std::size_t(plan.num_units()))
    {
        throw FormatError("inconsistent PLAN section");
    }
    for (Count u : plan.box_proc_id)
    {
        if (u >= Count(plan.num_units())) { throw FormatError("PLAN section names an unknown unit"); }
    }
    return plan;
}

} // namespace fmmds
