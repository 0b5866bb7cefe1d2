#include "fmmds/cluster.hpp"
#include "fmmds/errors.hpp"
#include "fmmds/exchange.hpp"
#include "fmmds/workload.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace fmmds;

namespace
{

FmmStructures build(const Workload& w, int l_max)
{
    BuildOptions o;
    o.l_max     = l_max;
    o.sort.mode = SortMode::deterministic;
    return build_all(w.sources, w.receivers, o);
}

FmmStructures full_grid(int level)
{
    Workload w;
    for (std::uint64_t b = 0; b < boxes_at_level(level); ++b)
    {
        w.sources.push_back({box_center({level, b}), 1.0});
        w.receivers.push_back(box_center({level, b}));
    }
    return build(w, level);
}

std::vector<TypedBoxList> classify_all(const FmmStructures& s, const PartitionPlan& plan)
{
    std::vector<TypedBoxList> t;
    for (int J = 0; J < plan.nodes; ++J)
    {
        t.push_back(classify(J, s.directory, plan));
    }
    return t;
}

std::vector<Complex> random_block(int p, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<Complex>                   b(tri_size(p));
    for (int n = 0; n < p; ++n)
    {
        for (int m = 0; m <= n; ++m)
        {
            b[tri_index(n, m)] = {u(rng), m == 0 ? 0.0 : u(rng)};
        }
    }
    return b;
}

// node states with complete zero data on exported boxes
std::vector<NodeState> ready_states(const FmmStructures& s, const std::vector<TypedBoxList>& typed,
                                    const FmmOperators& ops)
{
    std::vector<NodeState> nodes;
    for (std::size_t J = 0; J < typed.size(); ++J)
    {
        nodes.push_back(NodeState::empty(int(J), s.directory, ops));
        for (int l = 2; l <= s.l_max; ++l)
        {
            for (Count r : typed[J].levels[l].exports)
            {
                nodes[J].state[l][r] = BoxState::complete;
            }
        }
    }
    return nodes;
}

} // namespace

TEST(Exchange, PacketLayout)
{
    EXPECT_EQ(packet_bytes(1), 17u);
    EXPECT_EQ(packet_bytes(8), 9u + 512u);
    EXPECT_EQ(kRequestBytes, 9u);
}

TEST(Exchange, SingleNodeLedgerIsZero)
{
    auto w  = generate(3000, 3000, Distribution::uniform, 167);
    auto s  = build(w, 3);
    DistributedOptions o;
    o.p     = 4;
    auto up = run_distributed_upward(s, w.sources, w.receivers, o);
    EXPECT_TRUE(up.ledger.all_zero());
    EXPECT_TRUE(up.ledger.conserved());
    EXPECT_EQ(up.scatter.counters.bytes_moved, 0u);

    auto full = compute_multipoles(s, 4);
    for (int l = 2; l <= 3; ++l)
    {
        EXPECT_EQ(up.nodes[0].m[l], full[l]) << "level " << l;
    }
}

TEST(Exchange, RootPartialsAreSummed)
{
    const int p    = 5;
    auto      s    = full_grid(3);
    auto      plan = plan_from_cuts(2, 1, 3, std::vector<std::uint64_t>{260});
    auto      typed = classify_all(s, plan);
    FmmOperators ops(p);
    auto         nodes = ready_states(s, typed, ops);

    std::mt19937_64 rng(173);
    auto            u = random_block(p, rng), v = random_block(p, rng);
    Count           r = *s.directory.sources[2].rank_of(32);
    std::copy(u.begin(), u.end(), nodes[0].m[2].begin() + r * ops.block());
    std::copy(v.begin(), v.end(), nodes[1].m[2].begin() + r * ops.block());
    nodes[0].state[2][r] = nodes[1].state[2][r] = BoxState::partial;

    DataManager dm(s.directory, plan, p);
    dm.run_upward_exchange(nodes, typed);
    for (int J = 0; J < 2; ++J)
    {
        EXPECT_EQ(nodes[J].state[2][r], BoxState::complete);
        for (std::size_t k = 0; k < u.size(); ++k)
        {
            EXPECT_EQ(nodes[J].m[2][r * ops.block() + k], u[k] + v[k]) << "node " << J << " slot " << k;
        }
    }
    auto ledger = dm.meter();
    EXPECT_EQ(ledger.merged_roots, 1u);
    EXPECT_TRUE(ledger.conserved());
    EXPECT_EQ(ledger.unroutable_requests, 0u);
    for (const auto& n : ledger.nodes)
    {
        EXPECT_EQ(n.bytes_sent, n.packets_sent * packet_bytes(p) + n.requests_sent * kRequestBytes);
        EXPECT_EQ(n.bytes_received, n.packets_received * packet_bytes(p));
    }
}

TEST(Exchange, RepeatedExchangeIsIdempotent)
{
    auto w    = generate(6000, 6000, Distribution::uniform, 179);
    auto s    = build(w, 4);
    auto plan = plan_from_cuts(4, 1, 3, std::vector<std::uint64_t>{100, 260, 390});
    DistributedOptions o;
    o.nodes = 4;
    o.p     = 4;
    o.plan  = plan;
    auto up = run_distributed_upward(s, w.sources, w.receivers, o);
    EXPECT_GT(up.ledger.merged_roots, 0u);

    auto        again = up.nodes;
    DataManager dm(s.directory, up.plan, 4);
    dm.run_upward_exchange(again, up.typed);
    for (int J = 0; J < 4; ++J)
    {
        for (int l = 2; l <= 4; ++l)
        {
            EXPECT_EQ(again[J].m[l], up.nodes[J].m[l]);
        }
    }
    std::ostringstream trace;
    dm.write_trace(trace);
    EXPECT_EQ(trace.str().substr(0, 29), "phase,from,to,level,box,bytes");
    EXPECT_NE(trace.str().find(",manager,"), std::string::npos);
}

TEST(Exchange, CoarseLevelsMatchSingleNode)
{
    auto w    = generate(8000, 8000, Distribution::sphere, 181);
    auto s    = build(w, 5);
    auto full = compute_multipoles(s, 6);
    for (auto [P, g] : {std::pair{4, 1}, std::pair{2, 2}})
    {
        DistributedOptions o;
        o.nodes          = P;
        o.units_per_node = g;
        o.p              = 6;
        auto up          = run_distributed_upward(s, w.sources, w.receivers, o);
        EXPECT_TRUE(up.tally.exactly_once());
        EXPECT_EQ(up.tally.p2m_points, w.sources.size());
        for (int J = 0; J < P; ++J)
        {
            for (int l = 2; l <= up.plan.l_crit; ++l)
            {
                for (std::size_t r = 0; r < s.directory.sources[l].size(); ++r)
                {
                    ASSERT_EQ(up.nodes[J].state[l][r], BoxState::complete);
                    for (std::size_t k = 0; k < tri_size(6); ++k)
                    {
                        Complex a = up.nodes[J].m[l][r * tri_size(6) + k], b = full[l][r * tri_size(6) + k];
                        ASSERT_LE(std::abs(a - b), 1e-12 * std::max(1.0, std::abs(b)));
                    }
                }
            }
        }
    }
}

TEST(Exchange, MissingExportIsUnroutable)
{
    auto s     = full_grid(3);
    auto plan  = plan_from_cuts(2, 1, 3, std::vector<std::uint64_t>{256});
    auto typed = classify_all(s, plan);
    FmmOperators ops(2);
    auto         nodes = ready_states(s, typed, ops);
    ASSERT_FALSE(typed[0].levels[3].exports.empty());
    typed[0].levels[3].exports.pop_back();

    DataManager dm(s.directory, plan, 2);
    EXPECT_THROW(dm.run_upward_exchange(nodes, typed), RoutingError);
    EXPECT_GT(dm.meter().unroutable_requests, 0u);
}

TEST(Distributed, SingleNodeEqualsEvaluate)
{
    auto w = generate(5000, 4000, Distribution::uniform, 191);
    auto s = build(w, 3);
    DistributedOptions o;
    o.p     = 6;
    auto d  = evaluate_distributed(s, w.sources, w.receivers, o);
    auto ref = evaluate(s, {6, true, true, 0});
    EXPECT_LE(oracle::max_relative(d.potentials, ref), 1e-13);
}

TEST(Distributed, OutputsFollowInputOrder)
{
    auto w        = generate(4000, 4000, Distribution::uniform, 193);
    auto reversed = w;
    std::reverse(reversed.receivers.begin(), reversed.receivers.end());
    DistributedOptions o;
    o.nodes = 2;
    o.p     = 5;
    auto a  = evaluate_distributed(build(w, 3), w.sources, w.receivers, o).potentials;
    auto b  = evaluate_distributed(build(reversed, 3), reversed.sources, reversed.receivers, o).potentials;
    std::reverse(b.begin(), b.end());
    EXPECT_LE(oracle::max_relative(a, b), 1e-12);
}

TEST(Distributed, MatchesSingleNodeForSeveralNodeCounts)
{
    auto w   = generate(6000, 6000, Distribution::uniform, 197);
    auto s   = build(w, 4);
    auto ref = evaluate(s, {5, true, true, 0});
    for (int P : {2, 4, 8})
    {
        DistributedOptions o;
        o.nodes = P;
        o.p     = 5;
        auto d  = evaluate_distributed(s, w.sources, w.receivers, o);
        EXPECT_LE(oracle::relative_rms(d.potentials, ref), 1e-10) << "P = " << P;
        EXPECT_TRUE(d.upward.ledger.conserved());
        EXPECT_EQ(d.upward.ledger.unroutable_requests, 0u);
        EXPECT_GT(d.redistributed_bytes, 0u);
    }
}

TEST(Distributed, RejectsShallowTrees)
{
    auto w = generate(100, 100, Distribution::uniform, 199);
    auto s = build(w, 1);
    EXPECT_THROW(evaluate_distributed(s, w.sources, w.receivers, {}), DomainError);
}
