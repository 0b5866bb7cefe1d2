#pragma once

#include "fmmds/workload.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fmmds::cli
{

enum class Mode
{
    build,
    verify,
    evaluate,
    bench,
};

struct RunConfig
{
    std::size_t                n_sources{4096};
    std::size_t                n_receivers{4096};
    Distribution               dist{Distribution::uniform};
    std::optional<std::size_t> cluster_size;
    std::optional<int>         l_max;
    int                        p{8};
    int                        nodes{1};
    int                        units_per_node{1};
    std::uint64_t              seed{1};
    Mode                       mode{Mode::build};
    std::string                out{"-"};

    unsigned                   workers{0};
    double                     tolerance{1e-2}; //!< evaluate: bound on relative RMS error vs direct sum
    std::vector<std::size_t>   bench_sizes{std::size_t(1) << 18, std::size_t(1) << 19, std::size_t(1) << 20};
    int                        bench_runs{5};
    std::string                dump;  //!< build: binary container path
    std::string                trace; //!< evaluate/verify with nodes > 1: exchange trace CSV path
};

//! Invalid flag combination; the message is meant for the user.
class UsageError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/*! Parses argv into a RunConfig. Returns nullopt after printing help (exit code in *exitCode),
 *  throws UsageError on invalid input. */
std::optional<RunConfig> parse_run_config(int argc, const char* const* argv, int* exitCode = nullptr);

//! Checks mode-dependent requirements; throws UsageError.
void validate(const RunConfig& cfg);

inline constexpr const char* kCsvHeader = "mode,check,n_sources,n_receivers,l_max,p,nodes,units,metric,value,status";

//! Writes the CSV report; returns 0 iff every pass/fail row passed.
int run(const RunConfig& cfg, std::ostream& csv);

std::string mode_name(Mode m);

} // namespace fmmds::cli
