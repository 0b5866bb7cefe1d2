#include "cli.hpp"

#include "fmmds/boxtype.hpp"
#include "fmmds/cluster.hpp"
#include "fmmds/errors.hpp"
#include "fmmds/exchange.hpp"
#include "fmmds/fmm.hpp"
#include "fmmds/lists.hpp"
#include "fmmds/partition.hpp"
#include "fmmds/verify.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

namespace fmmds::cli
{

namespace
{

constexpr std::size_t kOracleThreshold = std::size_t(1) << 15;
constexpr std::size_t kOracleSample    = 4096;
constexpr double      kDistributedTol  = 1e-10;
constexpr double      kMaxBuildRatio   = 2.6;

struct Report
{
    std::ostream&  os;
    const RunConfig& cfg;
    int            l_max{0};
    bool           failed{false};

    void row(std::string_view check, std::size_t nS, std::size_t nR, std::string_view metric, double value,
             std::string_view status)
    {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.10g", value);
        os << mode_name(cfg.mode) << ',' << check << ',' << nS << ',' << nR << ',' << l_max << ',' << cfg.p << ','
           << cfg.nodes << ',' << cfg.units_per_node << ',' << metric << ',' << buf << ',' << status << '\n';
    }
    void info(std::string_view check, std::string_view metric, double value)
    {
        row(check, cfg.n_sources, cfg.n_receivers, metric, value, "info");
    }
    void check(std::string_view check, std::string_view metric, double value, bool pass)
    {
        row(check, cfg.n_sources, cfg.n_receivers, metric, value, pass ? "pass" : "fail");
        failed |= !pass;
    }
    void check(const CheckResult& r) { check(r.name, r.metric, r.value, r.pass); }
};

int resolve_l_max(const RunConfig& cfg)
{
    if (cfg.l_max) return *cfg.l_max;
    return level_for_cluster_size(std::max(cfg.n_sources, cfg.n_receivers), *cfg.cluster_size);
}

BuildOptions build_options(const RunConfig& cfg, int l_max)
{
    BuildOptions o;
    o.l_max        = l_max;
    o.sort.mode    = SortMode::deterministic;
    o.sort.workers = cfg.workers;
    return o;
}

DistributedOptions distributed_options(const RunConfig& cfg)
{
    DistributedOptions o;
    o.nodes          = cfg.nodes;
    o.units_per_node = cfg.units_per_node;
    o.p              = cfg.p;
    o.workers        = cfg.workers;
    return o;
}

//! max_j |a_j - b_j| / max_j |b_j|
double max_relative_difference(std::span<const double> a, std::span<const double> b)
{
    double diff = 0, scale = 0;
    for (std::size_t j = 0; j < a.size(); ++j)
    {
        diff  = std::max(diff, std::abs(a[j] - b[j]));
        scale = std::max(scale, std::abs(b[j]));
    }
    return scale > 0 ? diff / scale : diff;
}

void report_distributed(Report& rep, const UpwardResult& up)
{
    rep.check("exactly_once", "duplicates_plus_missing",
              double(up.tally.p2m_duplicates + up.tally.p2m_missing + up.tally.m2m_duplicates + up.tally.m2m_missing),
              up.tally.exactly_once());
    rep.check("traffic_conservation", "conserved", up.ledger.conserved() ? 1 : 0, up.ledger.conserved());
    rep.check("unroutable_requests", "count", double(up.ledger.unroutable_requests), up.ledger.unroutable_requests == 0);
    rep.info("partition", "l_par", up.plan.l_par);
    rep.info("partition", "imbalance", up.plan.imbalance);
    std::uint64_t sent = 0;
    for (const auto& n : up.ledger.nodes)
    {
        sent += n.bytes_sent;
    }
    rep.info("traffic", "node_bytes_sent", double(sent));
    rep.info("traffic", "manager_bytes_sent", double(up.ledger.manager_bytes_sent));
}

void write_trace(const RunConfig& cfg, const FmmStructures& s, const UpwardResult& up)
{
    if (cfg.trace.empty()) return;
    // the exchange is idempotent, so replaying it on the finished states reproduces its traffic
    FmmOperators           ops(cfg.p);
    DataManager            dm(s.directory, up.plan, cfg.p);
    std::vector<NodeState> nodes = up.nodes;
    dm.run_upward_exchange(nodes, up.typed);
    std::ofstream file(cfg.trace);
    if (!file) throw UsageError("cannot open trace file " + cfg.trace);
    dm.write_trace(file);
}

void run_build(const RunConfig& cfg, Report& rep, const Workload& w)
{
    std::vector<PhaseTiming> profile;
    auto                     t0 = std::chrono::steady_clock::now();
    FmmStructures            s  = build_all(w.sources, w.receivers, build_options(cfg, rep.l_max), &profile);
    double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& ph : profile)
    {
        rep.info(ph.name, "seconds", ph.seconds);
    }
    rep.info("build_total", "seconds", total);
    for (int l = 0; l <= s.l_max; ++l)
    {
        std::string name = "level_" + std::to_string(l);
        rep.info(name, "source_boxes", double(s.directory.sources[l].size()));
        rep.info(name, "receiver_boxes", double(s.directory.receivers[l].size()));
        rep.info(name, "stencil_entries", double(s.stencils.levels[l].list.size()));
    }
    rep.info("neighbor_table", "entries", double(s.neighbors.list.size()));

    Container c;
    c.l_max = std::uint32_t(s.l_max);
    c.sections.push_back(structures_section(s));
    if (s.l_max >= 2)
    {
        PartitionPlan plan = choose_partition(ReceiverLoad::from_sorted(s.receivers), cfg.nodes, cfg.units_per_node);
        rep.info("partition", "l_par", plan.l_par);
        rep.info("partition", "l_crit", plan.l_crit);
        rep.info("partition", "imbalance", plan.imbalance);
        std::vector<TypedBoxList> typed;
        for (int J = 0; J < cfg.nodes; ++J)
        {
            typed.push_back(classify(J, s.directory, plan, {cfg.workers, std::nullopt}));
        }
        std::map<BoxType, std::uint64_t> counts;
        for (const auto& t : typed)
        {
            for (const auto& lvl : t.levels)
            {
                for (BoxType b : lvl.type)
                {
                    ++counts[b];
                }
            }
        }
        for (auto [type, n] : counts)
        {
            rep.info("box_types", to_string(type), double(n));
        }
        c.sections.push_back(plan_section(plan));
        c.sections.push_back(boxtype_section(typed));
    }
    if (!cfg.dump.empty())
    {
        std::ofstream file(cfg.dump, std::ios::binary);
        if (!file) throw UsageError("cannot open dump file " + cfg.dump);
        write_container(file, c);
    }
}

void run_verify(const RunConfig& cfg, Report& rep, const Workload& w)
{
    FmmStructures s = build_all(w.sources, w.receivers, build_options(cfg, rep.l_max));
    for (const auto& r : run_structure_checks(w.sources, w.receivers, s, cfg.seed))
    {
        rep.check(r);
    }
    if (s.l_max < 2) return;
    PartitionPlan plan = choose_partition(ReceiverLoad::from_sorted(s.receivers), cfg.nodes, cfg.units_per_node);
    rep.check(check_boxtypes(s.directory, plan, cfg.seed));
    if (cfg.nodes > 1)
    {
        DistributedOptions o = distributed_options(cfg);
        o.plan               = plan;
        UpwardResult up      = run_distributed_upward(s, w.sources, w.receivers, o);
        report_distributed(rep, up);
        write_trace(cfg, s, up);
    }
}

void run_evaluate(const RunConfig& cfg, Report& rep, const Workload& w)
{
    FmmStructures   s = build_all(w.sources, w.receivers, build_options(cfg, rep.l_max));
    EvaluateOptions eo;
    eo.p       = cfg.p;
    eo.workers = cfg.workers;
    auto t0    = std::chrono::steady_clock::now();
    auto phi   = evaluate(s, eo);
    rep.info("evaluate", "seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());

    std::vector<std::size_t> sample;
    if (std::max(cfg.n_sources, cfg.n_receivers) > kOracleThreshold)
    {
        sample = sample_indices(w.receivers.size(), kOracleSample, cfg.seed);
    }
    else
    {
        sample = sample_indices(w.receivers.size(), w.receivers.size(), cfg.seed);
    }
    std::vector<Point3> ys;
    ys.reserve(sample.size());
    for (auto j : sample)
    {
        ys.push_back(w.receivers[j]);
    }
    auto   ref = direct_sum(w.sources, ys, cfg.workers);
    double num = 0, den = 0;
    for (std::size_t k = 0; k < sample.size(); ++k)
    {
        double d = phi[sample[k]] - ref[k];
        num += d * d;
        den += ref[k] * ref[k];
    }
    double err = den > 0 ? std::sqrt(num / den) : std::sqrt(num);
    rep.info("direct_sum", "oracle_receivers", double(sample.size()));
    rep.check("error_vs_direct", "relative_rms", err, err <= cfg.tolerance);

    if (cfg.nodes > 1)
    {
        DistributedResult dist = evaluate_distributed(s, w.sources, w.receivers, distributed_options(cfg));
        double            diff = max_relative_difference(dist.potentials, phi);
        rep.check("distributed_vs_single", "max_relative_difference", diff, diff <= kDistributedTol);
        report_distributed(rep, dist.upward);
        rep.info("traffic", "redistributed_bytes", double(dist.redistributed_bytes));
        write_trace(cfg, s, dist.upward);
    }
}

void run_bench(const RunConfig& cfg, Report& rep)
{
    std::vector<double> medians;
    for (std::size_t n : cfg.bench_sizes)
    {
        Workload            w = generate(n, n, cfg.dist, cfg.seed);
        std::vector<double> times;
        for (int r = 0; r < cfg.bench_runs; ++r)
        {
            BuildOptions o = build_options(cfg, rep.l_max);
            o.sort.mode    = SortMode::parallel;
            auto t0        = std::chrono::steady_clock::now();
            auto s         = build_all(w.sources, w.receivers, o);
            times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        }
        std::sort(times.begin(), times.end());
        medians.push_back(times[times.size() / 2]);
        rep.row("build_time", n, n, "median_seconds", medians.back(), "info");
    }
    for (std::size_t i = 1; i < medians.size(); ++i)
    {
        std::size_t n     = cfg.bench_sizes[i];
        double      ratio = medians[i] / medians[i - 1];
        // only doublings carry the linear-growth bound
        if (n == 2 * cfg.bench_sizes[i - 1])
        {
            bool pass = ratio <= kMaxBuildRatio;
            rep.row("build_ratio", n, n, "time_ratio_to_previous", ratio, pass ? "pass" : "fail");
            rep.failed |= !pass;
        }
        else
        {
            rep.row("build_ratio", n, n, "time_ratio_to_previous", ratio, "info");
        }
    }
}

} // namespace

std::string mode_name(Mode m)
{
    switch (m)
    {
    case Mode::build: return "build";
    case Mode::verify: return "verify";
    case Mode::evaluate: return "evaluate";
    case Mode::bench: return "bench";
    }
    return "?";
}

std::optional<RunConfig> parse_run_config(int argc, const char* const* argv, int* exitCode)
{
    RunConfig     cfg;
    std::string dist = "uniform", mode = "build";
    std::size_t cluster = 0;
    int         lmax    = 0;

    CLI::App app{"Builds, verifies, evaluates and benchmarks FMM data structures; writes a CSV report."};
    app.add_option("--n-sources", cfg.n_sources, "number of source points")->check(CLI::PositiveNumber);
    app.add_option("--n-receivers", cfg.n_receivers, "number of receiver points")->check(CLI::PositiveNumber);
    app.add_option("--dist", dist, "point distribution")->check(CLI::IsMember({"uniform", "sphere"}));
    auto* cs = app.add_option("--cluster-size", cluster, "target points per finest box")->check(CLI::PositiveNumber);
    auto* lm = app.add_option("--lmax", lmax, "finest octree level")->check(CLI::Range(0, kMaxLevel));
    cs->excludes(lm);
    app.add_option("--p", cfg.p, "expansion order")->check(CLI::Range(1, kMaxOrder));
    app.add_option("--nodes", cfg.nodes, "simulated nodes")->check(CLI::Range(1, 1 << 16));
    app.add_option("--units-per-node", cfg.units_per_node, "compute units per node")->check(CLI::Range(1, 1 << 10));
    app.add_option("--seed", cfg.seed, "workload seed");
    app.add_option("--mode", mode, "what to run")->check(CLI::IsMember({"build", "verify", "evaluate", "bench"}));
    app.add_option("--out", cfg.out, "CSV output path, - for stdout");
    app.add_option("--workers", cfg.workers, "worker threads, 0 for hardware concurrency");
    app.add_option("--tolerance", cfg.tolerance, "evaluate: relative RMS error bound")->check(CLI::PositiveNumber);
    app.add_option("--bench-sizes", cfg.bench_sizes, "bench: point counts (sources = receivers)");
    app.add_option("--runs", cfg.bench_runs, "bench: runs per size")->check(CLI::Range(1, 1000));
    app.add_option("--dump", cfg.dump, "build: write structures, plan and box types to a binary container");
    app.add_option("--trace", cfg.trace, "verify/evaluate with nodes > 1: write the exchange trace as CSV");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        int code = app.exit(e);
        if (exitCode) *exitCode = code;
        return std::nullopt;
    }
    catch (const CLI::ParseError& e)
    {
        throw UsageError(e.what());
    }

    cfg.dist = parse_distribution(dist);
    cfg.mode = mode == "build" ? Mode::build : mode == "verify" ? Mode::verify : mode == "evaluate" ? Mode::evaluate : Mode::bench;
    if (*cs) cfg.cluster_size = cluster;
    if (*lm) cfg.l_max = lmax;
    if (!cfg.cluster_size && !cfg.l_max)
    {
        if (cfg.mode == Mode::bench) cfg.l_max = 6;
        else cfg.cluster_size = 64;
    }
    validate(cfg);
    return cfg;
}

void validate(const RunConfig& cfg)
{
    if (cfg.cluster_size && cfg.l_max) throw UsageError("--cluster-size and --lmax are mutually exclusive");
    if (!cfg.cluster_size && !cfg.l_max) throw UsageError("one of --cluster-size or --lmax is required");
    if (cfg.cluster_size && *cfg.cluster_size == 0) throw UsageError("--cluster-size must be positive");
    if (cfg.n_sources == 0 || cfg.n_receivers == 0) throw UsageError("point counts must be positive");
    if (cfg.p < 1 || cfg.p > kMaxOrder) throw UsageError("--p must be in [1, " + std::to_string(kMaxOrder) + "]");
    if (cfg.nodes < 1 || cfg.units_per_node < 1) throw UsageError("--nodes and --units-per-node must be positive");
    if (cfg.mode == Mode::bench)
    {
        if (!cfg.l_max) throw UsageError("bench runs at a fixed level: use --lmax");
        if (cfg.bench_sizes.empty()) throw UsageError("--bench-sizes must not be empty");
    }
    if (!cfg.dump.empty() && cfg.mode != Mode::build) throw UsageError("--dump is only valid with --mode build");
    if (!cfg.trace.empty() && (cfg.nodes < 2 || (cfg.mode != Mode::verify && cfg.mode != Mode::evaluate)))
    {
        throw UsageError("--trace needs --nodes > 1 and --mode verify or evaluate");
    }
    if (cfg.mode == Mode::bench) return;
    int l_max = resolve_l_max(cfg);
    if ((cfg.nodes > 1 || cfg.units_per_node > 1) && l_max < 2)
    {
        throw UsageError("partitioning over several units needs l_max >= 2, got " + std::to_string(l_max));
    }
}

int run(const RunConfig& cfg, std::ostream& csv)
{
    validate(cfg);
    Report rep{csv, cfg, resolve_l_max(cfg)};
    csv << kCsvHeader << '\n';
    if (cfg.mode == Mode::bench)
    {
        run_bench(cfg, rep);
    }
    else
    {
        Workload w = generate(cfg.n_sources, cfg.n_receivers, cfg.dist, cfg.seed);
        switch (cfg.mode)
        {
        case Mode::build: run_build(cfg, rep, w); break;
        case Mode::verify: run_verify(cfg, rep, w); break;
        case Mode::evaluate: run_evaluate(cfg, rep, w); break;
        case Mode::bench: break;
        }
    }
    csv.flush();
    return rep.failed ? 1 : 0;
}

} // namespace fmmds::cli
