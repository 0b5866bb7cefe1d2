#include "fmmds/errors.hpp"
#include "fmmds/lists.hpp"
#include "fmmds/partition.hpp"
#include "fmmds/workload.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace fmmds;

namespace
{

ReceiverLoad uniform_load(int level)
{
    ReceiverLoad load;
    load.level = level;
    for (std::uint64_t b = 0; b < boxes_at_level(level); ++b)
    {
        load.boxes.push_back(b);
        load.counts.push_back(1);
    }
    return load;
}

// best achievable max/mean over all single cuts of the level-l loads
double best_two_way_imbalance(const ReceiverLoad& load, int level)
{
    LoadVector    v     = load_at_level(load, level);
    std::uint64_t total = 0;
    for (auto c : v.counts)
    {
        total += c;
    }
    double        best = 1e300;
    std::uint64_t left = 0;
    for (std::size_t cut = 0; cut <= v.counts.size(); ++cut)
    {
        best = std::min(best, 2.0 * double(std::max(left, total - left)) / double(total));
        if (cut < v.counts.size()) left += v.counts[cut];
    }
    return best;
}

} // namespace

TEST(Partition, SingleUnit)
{
    auto plan = choose_partition(uniform_load(3), 1, 1);
    EXPECT_EQ(plan.l_par, 2);
    EXPECT_EQ(plan.l_crit, 2);
    ASSERT_EQ(plan.ranges.size(), 1u);
    EXPECT_EQ(plan.ranges[0].begin, 0u);
    EXPECT_EQ(plan.ranges[0].end, 64u);
    EXPECT_TRUE(plan.balanced);
}

TEST(Partition, UniformLevelTwoSplitsEvenly)
{
    auto plan = choose_partition(uniform_load(2), 4, 2);
    ASSERT_EQ(plan.ranges.size(), 8u);
    for (int u = 0; u < 8; ++u)
    {
        EXPECT_EQ(plan.ranges[u].begin, std::uint64_t(8 * u));
        EXPECT_EQ(plan.ranges[u].end, std::uint64_t(8 * u + 8));
        EXPECT_EQ(plan.ranges[u].load, 8u);
        EXPECT_EQ(plan.node_of_unit(u), u / 2);
    }
    EXPECT_DOUBLE_EQ(plan.imbalance, 1.0);
}

TEST(Partition, ConcentratedLoadDeepens)
{
    // every receiver inside level-2 box 0, spread over its level-4 descendants
    ReceiverLoad load;
    load.level = 4;
    for (std::uint64_t b = 0; b < 64; ++b)
    {
        load.boxes.push_back(b);
        load.counts.push_back(1 + Count(b % 3));
    }
    PartitionOptions o;
    o.balance_tolerance = 0.1;
    EXPECT_GT(best_two_way_imbalance(load, 2), 1.1);
    auto plan = choose_partition(load, 2, 1, o);
    EXPECT_GT(plan.l_par, 2);
    EXPECT_TRUE(plan.balanced);
    EXPECT_LE(plan.imbalance, 1.1);
    EXPECT_EQ(plan.l_crit, critical_level(plan.l_par));
}

TEST(Partition, UnbalanceableLoadReturnsBestPlan)
{
    ReceiverLoad load;
    load.level  = 3;
    load.boxes  = {0, 1};
    load.counts = {100, 1};
    auto plan   = choose_partition(load, 2, 1);
    EXPECT_FALSE(plan.balanced);
    EXPECT_NEAR(plan.imbalance, 200.0 / 101.0, 1e-12);
}

TEST(Partition, Errors)
{
    ReceiverLoad tiny;
    tiny.level  = 2;
    tiny.boxes  = {3, 9};
    tiny.counts = {1, 1};
    EXPECT_THROW(choose_partition(tiny, 3, 1), InfeasiblePartitionError);
    EXPECT_THROW(choose_partition(uniform_load(1), 1, 1), DomainError);
    EXPECT_THROW(choose_partition(uniform_load(2), 0, 1), DomainError);
}

TEST(Partition, GreedyCutTiesGoToEarlierRange)
{
    LoadVector v{1, {1, 2, 1}};
    auto       r = greedy_cut(v, 2);
    // target 2: boundary after box 0 has prefix 1, after box 1 prefix 3, equally far
    EXPECT_EQ(r[0].end, 2u);
    EXPECT_EQ(r[0].load, 3u);
    EXPECT_EQ(r[1].load, 1u);
}

TEST(Partition, OwnershipLookups)
{
    std::vector<std::uint64_t> cuts{32};
    auto                       plan = plan_from_cuts(2, 1, 2, cuts);
    EXPECT_EQ(unit_of({3, 100}, plan), 0);
    EXPECT_EQ(node_of({3, 100}, plan), 0);
    EXPECT_EQ(unit_of({2, 40}, plan), 1);
    Owners root = owner_of({0, 0}, plan);
    EXPECT_EQ(root.first_unit, 0);
    EXPECT_EQ(root.last_unit, 1);
    EXPECT_FALSE(root.single_unit());
    EXPECT_THROW(unit_of({1, 0}, plan), DomainError);
    for (std::uint64_t b = 0; b < 64; ++b)
    {
        EXPECT_EQ(owner_of({2, b}, plan).first_unit, int(plan.box_proc_id[b]));
    }
}

TEST(Partition, OwnersMatchRangeOracle)
{
    auto w    = generate(20000, 20000, Distribution::sphere, 67);
    auto load = ReceiverLoad::from_points(w.receivers, 5);
    auto plan = choose_partition(load, 4, 2);
    for (int level = 0; level <= 5; ++level)
    {
        for (std::uint64_t b = 0; b < boxes_at_level(level); ++b)
        {
            auto   want = oracle::owner_nodes(plan, level, b);
            Owners got  = owner_of({level, b}, plan);
            if (want.empty()) continue; // boxes beyond every range do not occur
            EXPECT_EQ(got.first_node, *want.begin());
            EXPECT_EQ(got.last_node, *want.rbegin());
        }
    }
}

TEST(Scatter, SingleUnitHasNoHalo)
{
    auto w    = generate(3000, 3000, Distribution::uniform, 71);
    auto plan = choose_partition(ReceiverLoad::from_points(w.receivers, 3), 1, 1);
    auto sc   = scatter_points(w.sources, w.receivers, plan, 3);
    ASSERT_EQ(sc.units.size(), 1u);
    EXPECT_EQ(sc.units[0].sources.size(), w.sources.size());
    EXPECT_EQ(sc.units[0].receivers.size(), w.receivers.size());
    EXPECT_EQ(sc.counters.halo_copies, 0u);
    EXPECT_EQ(sc.counters.bytes_moved, 0u);
}

TEST(Scatter, InteriorSourceHasOneCopy)
{
    std::vector<ChargedPoint> src{{{0.1, 0.1, 0.1}, 1.0}};
    std::vector<Point3>       recv{{0.1, 0.1, 0.1}, {0.9, 0.9, 0.9}};
    std::vector<std::uint64_t> cuts{32};
    auto plan = plan_from_cuts(2, 1, 2, cuts);
    auto sc   = scatter_points(src, recv, plan, 3);
    EXPECT_EQ(sc.units[0].sources.size(), 1u);
    EXPECT_TRUE(sc.units[1].sources.empty());
    EXPECT_EQ(sc.counters.halo_copies, 0u);
}

TEST(Scatter, NearFieldIsResolvableOnEachUnit)
{
    const int l_max = 4;
    auto      w     = generate(8000, 8000, Distribution::uniform, 73);
    auto      plan  = choose_partition(ReceiverLoad::from_points(w.receivers, l_max), 2, 1);
    auto      sc    = scatter_points(w.sources, w.receivers, plan, l_max);

    std::size_t receivers = 0, owned = 0;
    for (int u = 0; u < 2; ++u)
    {
        const auto&        up = sc.units[u];
        std::set<Count>    have(up.source_ids.begin(), up.source_ids.end());
        receivers += up.receivers.size();
        for (std::size_t k = 0; k < up.source_ids.size(); ++k)
        {
            owned += up.source_owned[k];
            EXPECT_EQ(up.sources[k], w.sources[up.source_ids[k]]);
        }
        std::set<std::uint64_t> boxes;
        for (std::size_t k = 0; k < up.receivers.size(); ++k)
        {
            EXPECT_EQ(up.receivers[k], w.receivers[up.receiver_ids[k]]);
            EXPECT_EQ(unit_of({l_max, oracle::box_of(up.receivers[k], l_max)}, plan), u);
            boxes.insert(oracle::box_of(up.receivers[k], l_max));
        }
        // single-node gather: every source adjacent to one of this unit's receiver boxes
        for (std::size_t i = 0; i < w.sources.size(); ++i)
        {
            std::uint64_t sb = oracle::box_of(w.sources[i].position, l_max);
            bool          need = false;
            for (auto rb : boxes)
            {
                if (oracle::adjacent(l_max, sb, rb)) { need = true; break; }
            }
            if (need) { EXPECT_TRUE(have.count(Count(i))) << "unit " << u << " source " << i; }
        }
    }
    EXPECT_EQ(receivers, w.receivers.size());
    EXPECT_EQ(owned, w.sources.size());
    EXPECT_GT(sc.counters.halo_copies, 0u);
}

TEST(Partition, PlanSectionRoundTrip)
{
    auto w    = generate(5000, 5000, Distribution::uniform, 79);
    auto plan = choose_partition(ReceiverLoad::from_points(w.receivers, 4), 3, 2);
    EXPECT_EQ(plan_from_section(plan_section(plan)), plan);
    auto sec = plan_section(plan);
    sec.payload.pop_back();
    EXPECT_THROW(plan_from_section(sec), FormatError);
}
