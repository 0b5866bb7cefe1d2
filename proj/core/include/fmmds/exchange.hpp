/*! @file
 * @brief Simulated master/worker exchange of multipole data between nodes
 *
 * Nodes only talk to the data manager. Upward: nodes send EXPORT and ROOT packets, the
 * manager sums partial ROOT contributions in ascending node order, then answers each node's
 * IMPORT and ROOT requests. Every transfer is metered.
 *
 * Wire layout: packet = level u8, box u64, p^2 coefficients as f64 (real-packed, see
 * harmonics.hpp); request = level u8, box u64.
 */
#pragma once

#include "fmmds/boxtype.hpp"
#include "fmmds/fmm.hpp"
#include "fmmds/partition.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace fmmds
{

inline constexpr std::size_t kPacketHeaderBytes = 9;
inline constexpr std::size_t kRequestBytes      = 9;

inline std::size_t packet_bytes(int p) { return kPacketHeaderBytes + 8 * std::size_t(p) * p; }

struct MDataPacket
{
    int                 level{0};
    std::uint64_t       box{0};
    std::vector<double> coefficients; //!< p^2 values
    bool                complete{true};
};

enum class BoxState : std::uint8_t
{
    absent,
    partial,
    complete,
};

//! One node's view of the source tree: M-data and state per global non-empty source box.
struct NodeState
{
    int                                node{0};
    LevelCoefficients                  m;
    std::vector<std::vector<BoxState>> state;

    //! Zeroed data and absent states for levels 2..l_max of the directory.
    static NodeState empty(int node, const LevelDirectory& dir, const FmmOperators& ops);
};

struct NodeTraffic
{
    std::uint64_t              bytes_sent{0};
    std::uint64_t              bytes_received{0};
    std::uint64_t              packets_sent{0};
    std::uint64_t              packets_received{0};
    std::uint64_t              requests_sent{0};
    std::vector<std::uint64_t> exported_per_level;
    std::vector<std::uint64_t> imported_per_level;

    friend bool operator==(const NodeTraffic&, const NodeTraffic&) = default;
};

struct TrafficLedger
{
    std::vector<NodeTraffic> nodes;
    std::uint64_t            manager_bytes_received{0};
    std::uint64_t            manager_bytes_sent{0};
    std::uint64_t            merged_roots{0};
    std::uint64_t            broadcast_bytes_lcrit{0}; //!< both directions, level l_crit only
    std::uint64_t            unroutable_requests{0};

    //! Bytes sent by nodes equal bytes received by the manager, and the reverse.
    bool conserved() const;
    bool all_zero() const;

    friend bool operator==(const TrafficLedger&, const TrafficLedger&) = default;
};

struct TraceRecord
{
    const char*   phase{""}; //!< "export", "root", "request", "reply"
    int           from{0};   //!< node id, -1 for the manager
    int           to{0};
    int           level{0};
    std::uint64_t box{0};
    std::uint64_t bytes{0};
};

class DataManager
{
public:
    DataManager(const LevelDirectory& dir, const PartitionPlan& plan, int p);

    /*! @brief Upward exchange for levels l_crit..l_max
     *
     * On return every node's IMPORT and ROOT boxes hold complete M-data. Throws RoutingError
     * naming the first import request no node exports. Complete ROOT packets are taken as-is,
     * so repeating the exchange leaves all coefficients unchanged.
     */
    void run_upward_exchange(std::vector<NodeState>& nodes, const std::vector<TypedBoxList>& typed);

    TrafficLedger                   meter() const { return ledger_; }
    const std::vector<TraceRecord>& trace() const { return trace_; }

    //! CSV: phase,from,to,level,box,bytes (manager written as "manager").
    void write_trace(std::ostream& os) const;

private:
    void record(const char* phase, int from, int to, int level, std::uint64_t box, std::uint64_t bytes);

    const LevelDirectory& dir_;
    const PartitionPlan&  plan_;
    int                   p_;
    TrafficLedger         ledger_;
    std::vector<TraceRecord> trace_;
};

MDataPacket make_packet(const NodeState& node, int level, Count rank, int p, std::uint64_t box);

} // namespace fmmds
