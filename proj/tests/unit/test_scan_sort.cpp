#include "fmmds/errors.hpp"
#include "fmmds/pseudosort.hpp"
#include "fmmds/scan.hpp"
#include "fmmds/workload.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace fmmds;

TEST(Scan, FixedValues)
{
    std::vector<Count> in{1, 2, 3, 4};
    auto               r = exclusive_scan(in);
    EXPECT_EQ(r.values, (std::vector<Count>{0, 1, 3, 6}));
    EXPECT_EQ(r.total, 10u);

    std::vector<Count> zeros(3, 0);
    auto               z = exclusive_scan(zeros);
    EXPECT_EQ(z.values, (std::vector<Count>{0, 0, 0}));
    EXPECT_EQ(z.total, 0u);
}

TEST(Scan, MatchesSequentialFoldForAnyWorkerCount)
{
    std::mt19937_64    rng(11);
    std::vector<Count> in(100000);
    for (auto& v : in)
    {
        v = Count(rng() % 1000);
    }
    std::vector<Count> want(in.size());
    Count              acc = 0;
    for (std::size_t i = 0; i < in.size(); ++i)
    {
        want[i] = acc;
        acc += in[i];
    }
    for (unsigned w : {1u, 2u, 3u, 7u})
    {
        auto r = exclusive_scan(in, w);
        EXPECT_EQ(r.values, want);
        EXPECT_EQ(r.total, acc);
    }
}

TEST(Scan, OverflowIsReported)
{
    std::vector<Count> in{0xFFFFFFFFu, 1u};
    EXPECT_THROW(exclusive_scan(in), CapacityError);
}

TEST(Compact, FixedValues)
{
    std::vector<Count> flags{1, 0, 1, 1};
    auto               c = compact_flags(flags);
    EXPECT_EQ(c.ranks, (std::vector<Count>{0, 1, 1, 2}));
    EXPECT_EQ(c.count, 3u);
    std::vector<Count> none(5, 0);
    EXPECT_EQ(compact_flags(none).count, 0u);
    std::vector<Count> bad{0, 2};
    EXPECT_THROW(compact_flags(bad), DomainError);
}

TEST(Compact, RandomFlagsGiveDenseIncreasingSlots)
{
    std::mt19937_64    rng(13);
    std::vector<Count> flags(std::size_t(1) << 15);
    for (auto& f : flags)
    {
        f = Count(rng() & 1);
    }
    auto  c    = compact_flags(flags, 3);
    Count next = 0;
    for (std::size_t i = 0; i < flags.size(); ++i)
    {
        ASSERT_EQ(c.ranks[i], next);
        if (flags[i]) ++next;
    }
    EXPECT_EQ(c.count, next);
}

TEST(PseudoSort, ThreePointHistogram)
{
    std::vector<Point3> pts{{0.1, 0.1, 0.1}, {0.9, 0.9, 0.9}, {0.15, 0.2, 0.05}};
    for (auto mode : {SortMode::parallel, SortMode::deterministic})
    {
        auto h = histogram_and_sort_index(pts, 1, {mode, 2});
        EXPECT_EQ(h.bins, (std::vector<Count>{2, 0, 0, 0, 0, 0, 0, 1}));
        EXPECT_EQ(h.sort_index[0].box, 0u);
        EXPECT_EQ(h.sort_index[1].box, 7u);
        EXPECT_EQ(h.sort_index[2].box, 0u);
        EXPECT_EQ(h.sort_index[1].rank_in_box, 0u);
        EXPECT_NE(h.sort_index[0].rank_in_box, h.sort_index[2].rank_in_box);
        EXPECT_LE(std::max(h.sort_index[0].rank_in_box, h.sort_index[2].rank_in_box), 1u);
    }

    auto s = pseudo_sort<Point3>(pts, 1);
    EXPECT_EQ(s.points[2], pts[1]);
    EXPECT_TRUE((s.points[0] == pts[0] && s.points[1] == pts[2]) || (s.points[0] == pts[2] && s.points[1] == pts[0]));
    EXPECT_EQ(s.bookmarks, (std::vector<Count>{0, 2, 3}));
    EXPECT_EQ(s.non_empty_index, (std::vector<std::uint64_t>{0, 7}));
}

TEST(PseudoSort, EmptyAndSinglePoint)
{
    std::vector<Point3> none;
    auto                h = histogram_and_sort_index(none, 2);
    EXPECT_EQ(h.bins.size(), 64u);
    EXPECT_TRUE(std::all_of(h.bins.begin(), h.bins.end(), [](Count c) { return c == 0; }));
    EXPECT_TRUE(h.sort_index.empty());

    std::vector<Point3> one{{0.3, 0.6, 0.2}};
    auto                s = pseudo_sort<Point3>(one, 3);
    EXPECT_EQ(s.permutation, (std::vector<Count>{0}));
    EXPECT_EQ(s.bookmarks, (std::vector<Count>{0, 1}));
}

TEST(Bookmarks, FixedValues)
{
    std::vector<Count> bins{2, 0, 0, 0, 0, 0, 0, 1};
    auto               b = build_bookmarks(bins);
    EXPECT_EQ(b.bookmarks, (std::vector<Count>{0, 2, 3}));
    EXPECT_EQ(b.non_empty_index, (std::vector<std::uint64_t>{0, 7}));

    std::vector<Count> empty(8, 0);
    auto               e = build_bookmarks(empty);
    EXPECT_EQ(e.bookmarks, (std::vector<Count>{0}));
    EXPECT_TRUE(e.non_empty_index.empty());
}

TEST(Bookmarks, MatchSequentialCompaction)
{
    std::mt19937_64    rng(17);
    std::vector<Count> bins(4096);
    for (auto& b : bins)
    {
        b = rng() % 3 == 0 ? Count(rng() % 5) : 0;
    }
    std::vector<Count>         marks{0};
    std::vector<std::uint64_t> idx;
    for (std::size_t i = 0; i < bins.size(); ++i)
    {
        if (bins[i] == 0) continue;
        idx.push_back(i);
        marks.push_back(marks.back() + bins[i]);
    }
    auto b = build_bookmarks(bins, 3);
    EXPECT_EQ(b.bookmarks, marks);
    EXPECT_EQ(b.non_empty_index, idx);
}

TEST(PseudoSort, BinsMatchCountingOracle)
{
    auto               pts = generate_points(100000, Distribution::uniform, 19, 0);
    auto               h   = histogram_and_sort_index(pts, 4, {SortMode::parallel, 3});
    std::vector<Count> want(4096, 0);
    for (const auto& p : pts)
    {
        ++want[oracle::box_of(p, 4)];
    }
    EXPECT_EQ(h.bins, want);
}

TEST(PseudoSort, GroupedLikeAComparisonSort)
{
    auto pts = generate_points(100000, Distribution::sphere, 23, 0);
    for (auto mode : {SortMode::parallel, SortMode::deterministic})
    {
        auto s = pseudo_sort<Point3>(pts, 5, {mode, 3});

        auto key  = [](const Point3& p) { return std::tuple(oracle::box_of(p, 5), p.x, p.y, p.z); };
        auto want = pts;
        std::sort(want.begin(), want.end(), [&](auto& a, auto& b) { return key(a) < key(b); });
        auto got = s.points;
        // within-box order is free, so compare after sorting each slice
        for (std::size_t i = 0; i < s.num_boxes(); ++i)
        {
            std::sort(got.begin() + s.box_begin(i), got.begin() + s.box_end(i),
                      [&](auto& a, auto& b) { return key(a) < key(b); });
        }
        ASSERT_EQ(got, want);
        for (std::size_t j = 0; j < s.points.size(); ++j)
        {
            ASSERT_EQ(s.points[j], pts[s.permutation[j]]);
        }
    }
}

TEST(PseudoSort, DeterministicModeIsWorkerInvariantAndStable)
{
    auto pts  = generate_points(50000, Distribution::uniform, 29, 0);
    auto base = pseudo_sort<Point3>(pts, 4, {SortMode::deterministic, 1});
    for (std::size_t i = 0; i < base.num_boxes(); ++i)
    {
        for (std::size_t j = base.box_begin(i) + 1; j < base.box_end(i); ++j)
        {
            ASSERT_LT(base.permutation[j - 1], base.permutation[j]);
        }
    }
    for (unsigned w : {2u, 3u, 5u})
    {
        EXPECT_EQ(pseudo_sort<Point3>(pts, 4, {SortMode::deterministic, w}), base);
        auto par = pseudo_sort<Point3>(pts, 4, {SortMode::parallel, w});
        EXPECT_EQ(par.bookmarks, base.bookmarks);
        EXPECT_EQ(par.non_empty_index, base.non_empty_index);
    }
}

TEST(PseudoSort, HistogramBudgetIsEnforced)
{
    std::vector<Point3> pts{{0.5, 0.5, 0.5}};
    SortOptions         o;
    o.memory_budget_bytes = 1024;
    EXPECT_THROW(pseudo_sort<Point3>(pts, 6, o), CapacityError);
    std::vector<Point3> outside{{1.5, 0.5, 0.5}};
    EXPECT_THROW(pseudo_sort<Point3>(outside, 2), DomainError);
}
