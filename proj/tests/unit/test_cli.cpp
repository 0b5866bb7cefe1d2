#include "cli.hpp"

#include "fmmds/container.hpp"
#include "fmmds/errors.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

using namespace fmmds;
using namespace fmmds::cli;

namespace
{

RunConfig parse(std::vector<std::string> args)
{
    args.insert(args.begin(), "fmmds");
    std::vector<const char*> argv;
    for (auto& a : args)
    {
        argv.push_back(a.c_str());
    }
    auto cfg = parse_run_config(int(argv.size()), argv.data());
    if (!cfg) throw std::runtime_error("help requested");
    return *cfg;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text)
{
    std::vector<std::vector<std::string>> rows;
    std::istringstream                    in(text);
    std::string                           line;
    while (std::getline(in, line))
    {
        std::vector<std::string> cells;
        std::istringstream       ls(line);
        std::string              cell;
        while (std::getline(ls, cell, ','))
        {
            cells.push_back(cell);
        }
        rows.push_back(cells);
    }
    return rows;
}

} // namespace

TEST(Cli, ParsesFlags)
{
    auto s = parse({"--n-sources", "100", "--n-receivers", "50", "--dist", "sphere", "--lmax", "3", "--p", "6",
                    "--nodes", "2", "--units-per-node", "2", "--seed", "9", "--mode", "evaluate", "--out", "x.csv"});
    EXPECT_EQ(s.n_sources, 100u);
    EXPECT_EQ(s.n_receivers, 50u);
    EXPECT_EQ(s.dist, Distribution::sphere);
    EXPECT_EQ(s.l_max, 3);
    EXPECT_FALSE(s.cluster_size);
    EXPECT_EQ(s.p, 6);
    EXPECT_EQ(s.nodes, 2);
    EXPECT_EQ(s.units_per_node, 2);
    EXPECT_EQ(s.seed, 9u);
    EXPECT_EQ(s.mode, Mode::evaluate);
    EXPECT_EQ(s.out, "x.csv");
}

TEST(Cli, RejectsInvalidCombinations)
{
    EXPECT_THROW(parse({"--lmax", "3", "--cluster-size", "8"}), UsageError);
    EXPECT_THROW(parse({"--dist", "cube"}), UsageError);
    EXPECT_THROW(parse({"--mode", "plot"}), UsageError);
    EXPECT_THROW(parse({"--p", "0"}), UsageError);
    EXPECT_THROW(parse({"--mode", "bench", "--cluster-size", "8"}), UsageError);
    EXPECT_THROW(parse({"--mode", "verify", "--dump", "x.bin"}), UsageError);
    EXPECT_THROW(parse({"--lmax", "1", "--nodes", "2"}), UsageError);
    EXPECT_THROW(parse({"--trace", "t.csv"}), UsageError);
    EXPECT_EQ(parse({"--mode", "bench"}).l_max, 6);
}

TEST(Cli, VerifySmallInstancePasses)
{
    auto               s = parse({"--n-sources", "4096", "--n-receivers", "4096", "--lmax", "3", "--mode", "verify"});
    std::ostringstream out;
    EXPECT_EQ(run(s, out), 0);
    auto rows = csv_rows(out.str());
    ASSERT_GT(rows.size(), 6u);
    EXPECT_EQ(out.str().substr(0, out.str().find('\n')), kCsvHeader);
    for (std::size_t i = 1; i < rows.size(); ++i)
    {
        ASSERT_EQ(rows[i].size(), 11u);
        EXPECT_EQ(rows[i][10], "pass") << rows[i][1];
    }
}

TEST(Cli, EvaluateComparesNodeCounts)
{
    auto s = parse({"--n-sources", "3000", "--n-receivers", "3000", "--lmax", "3", "--p", "6", "--nodes", "4",
                    "--mode", "evaluate"});
    std::ostringstream out;
    EXPECT_EQ(run(s, out), 0);
    EXPECT_NE(out.str().find("distributed_vs_single"), std::string::npos);
    EXPECT_NE(out.str().find("exactly_once"), std::string::npos);
}

TEST(Cli, FailedCheckGivesExitCodeOne)
{
    auto s = parse({"--n-sources", "2000", "--n-receivers", "2000", "--lmax", "3", "--p", "2", "--mode", "evaluate",
                    "--tolerance", "1e-9"});
    std::ostringstream out;
    EXPECT_EQ(run(s, out), 1);
    EXPECT_NE(out.str().find(",fail"), std::string::npos);
}

TEST(Cli, InfeasiblePartitionThrows)
{
    auto s = parse({"--n-sources", "10", "--n-receivers", "2", "--lmax", "2", "--nodes", "4", "--mode", "verify"});
    std::ostringstream out;
    EXPECT_THROW(run(s, out), InfeasiblePartitionError);
}

TEST(Cli, BuildDumpsAllSections)
{
    std::string path = ::testing::TempDir() + "fmmds_dump.bin";
    auto s = parse({"--n-sources", "2000", "--n-receivers", "2000", "--lmax", "3", "--nodes", "2", "--dump", path});
    std::ostringstream out;
    EXPECT_EQ(run(s, out), 0);
    std::ifstream in(path, std::ios::binary);
    Container     c = read_container(in);
    EXPECT_EQ(c.l_max, 3u);
    EXPECT_NE(c.find("STRC"), nullptr);
    EXPECT_NE(c.find("PLAN"), nullptr);
    EXPECT_NE(c.find("BTYP"), nullptr);
    std::remove(path.c_str());
}

TEST(Cli, BenchReportsRatios)
{
    auto s = parse({"--mode", "bench", "--lmax", "3", "--bench-sizes", "4096", "8192", "--runs", "3"});
    std::ostringstream out;
    run(s, out);
    auto rows = csv_rows(out.str());
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[3][1], "build_ratio");
}
