#include "fmmds/exchange.hpp"

#include "fmmds/errors.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <string>

namespace fmmds
{

NodeState NodeState::empty(int node, const LevelDirectory& dir, const FmmOperators& ops)
{
    NodeState s;
    s.node = node;
    s.m    = allocate_coefficients(dir.sources, ops);
    s.state.resize(dir.l_max + 1);
    for (int l = 2; l <= dir.l_max; ++l)
    {
        s.state[l].assign(dir.sources[l].size(), BoxState::absent);
    }
    return s;
}

bool TrafficLedger::conserved() const
{
    std::uint64_t sent = 0, received = 0;
    for (const auto& n : nodes)
    {
        sent += n.bytes_sent;
        received += n.bytes_received;
    }
    return sent == manager_bytes_received && received == manager_bytes_sent;
}

bool TrafficLedger::all_zero() const
{
    for (const auto& n : nodes)
    {
        if (n.bytes_sent || n.bytes_received || n.packets_sent || n.packets_received || n.requests_sent) return false;
    }
    return manager_bytes_received == 0 && manager_bytes_sent == 0 && merged_roots == 0 && broadcast_bytes_lcrit == 0;
}

MDataPacket make_packet(const NodeState& node, int level, Count rank, int p, std::uint64_t box)
{
    MDataPacket pk;
    pk.level = level;
    pk.box   = box;
    pk.coefficients.resize(std::size_t(p) * p);
    pack_real(p, node.m[level].data() + rank * tri_size(p), pk.coefficients.data());
    pk.complete = node.state[level][rank] == BoxState::complete;
    return pk;
}

DataManager::DataManager(const LevelDirectory& dir, const PartitionPlan& plan, int p)
    : dir_(dir)
    , plan_(plan)
    , p_(p)
{
    ledger_.nodes.resize(plan.nodes);
    for (auto& n : ledger_.nodes)
    {
        n.exported_per_level.assign(dir.l_max + 1, 0);
        n.imported_per_level.assign(dir.l_max + 1, 0);
    }
}

void DataManager::record(const char* phase, int from, int to, int level, std::uint64_t box, std::uint64_t bytes)
{
    trace_.push_back({phase, from, to, level, box, bytes});
    if (level == plan_.l_crit) { ledger_.broadcast_bytes_lcrit += bytes; }
}

void DataManager::run_upward_exchange(std::vector<NodeState>& nodes, const std::vector<TypedBoxList>& typed)
{
    const int         P     = plan_.nodes;
    const int         lc    = plan_.l_crit;
    const int         L     = dir_.l_max;
    const std::size_t B     = tri_size(p_);
    const std::size_t pkt   = packet_bytes(p_);
    const std::size_t width = std::size_t(p_) * p_;
    if (int(nodes.size()) != P || int(typed.size()) != P)
    {
        throw DomainError("exchange needs one state and one typed list per node");
    }

    struct Stored
    {
        std::vector<std::uint64_t> boxes;
        std::vector<double>        data;
    };
    struct Root
    {
        std::vector<double> sum;
        bool                complete{false};
    };
    std::vector<std::vector<Stored>> exports(P, std::vector<Stored>(L + 1));
    std::map<std::uint64_t, Root>    roots;

    // collect, nodes in ascending order so ROOT sums are reproducible
    for (int J = 0; J < P; ++J)
    {
        auto& traffic = ledger_.nodes[J];
        for (int l = lc; l <= L; ++l)
        {
            const TypedLevel& t = typed[J].levels[l];
            for (Count r : t.exports)
            {
                MDataPacket pk = make_packet(nodes[J], l, r, p_, t.index[r]);
                if (!pk.complete)
                {
                    throw DomainError("node " + std::to_string(J) + " exports box " + std::to_string(pk.box) +
                                      " at level " + std::to_string(l) + " without complete M-data");
                }
                exports[J][l].boxes.push_back(pk.box);
                exports[J][l].data.insert(exports[J][l].data.end(), pk.coefficients.begin(), pk.coefficients.end());
                traffic.bytes_sent += pkt;
                traffic.packets_sent += 1;
                traffic.exported_per_level[l] += 1;
                ledger_.manager_bytes_received += pkt;
                record("export", J, -1, l, pk.box, pkt);
            }
            for (Count r : t.roots)
            {
                MDataPacket pk   = make_packet(nodes[J], l, r, p_, t.index[r]);
                Root&       root = roots[pk.box];
                if (root.sum.empty()) { root.sum.assign(width, 0.0); }
                if (pk.complete)
                {
                    root.sum      = pk.coefficients;
                    root.complete = true;
                }
                else if (!root.complete)
                {
                    for (std::size_t k = 0; k < width; ++k)
                    {
                        root.sum[k] += pk.coefficients[k];
                    }
                }
                traffic.bytes_sent += pkt;
                traffic.packets_sent += 1;
                ledger_.manager_bytes_received += pkt;
                record("root", J, -1, l, pk.box, pkt);
            }
        }
    }
    ledger_.merged_roots = roots.size();

    auto findExport = [&](int K, int l, std::uint64_t box) -> const double* {
        const Stored& s  = exports[K][l];
        auto          it = std::lower_bound(s.boxes.begin(), s.boxes.end(), box);
        if (it == s.boxes.end() || *it != box) return nullptr;
        return s.data.data() + (it - s.boxes.begin()) * width;
    };
    auto findRoot = [&](std::uint64_t box) -> const double* {
        auto it = roots.find(box);
        return it == roots.end() ? nullptr : it->second.sum.data();
    };

    std::string firstFailure;
    for (int J = 0; J < P; ++J)
    {
        auto& traffic = ledger_.nodes[J];
        for (int l = lc; l <= L; ++l)
        {
            const TypedLevel& t = typed[J].levels[l];
            std::vector<Count> wanted(t.imports);
            wanted.insert(wanted.end(), t.roots.begin(), t.roots.end());
            for (Count r : wanted)
            {
                const std::uint64_t box = t.index[r];
                traffic.requests_sent += 1;
                traffic.bytes_sent += kRequestBytes;
                ledger_.manager_bytes_received += kRequestBytes;
                record("request", J, -1, l, box, kRequestBytes);

                const double* src = nullptr;
                if (t.type[r] == BoxType::ROOT) { src = findRoot(box); }
                else if (l > lc) { src = findExport(node_of({l, box}, plan_), l, box); }
                else
                {
                    Owners o = owner_of({l, box}, plan_);
                    src      = o.first_node != o.last_node ? findRoot(box) : findExport(o.first_node, l, box);
                }
                if (!src)
                {
                    ledger_.unroutable_requests += 1;
                    if (firstFailure.empty())
                    {
                        firstFailure = "node " + std::to_string(J) + " requested box " + std::to_string(box) +
                                       " at level " + std::to_string(l) + " but no node exports it";
                    }
                    continue;
                }
                unpack_real(p_, src, nodes[J].m[l].data() + r * B);
                nodes[J].state[l][r] = BoxState::complete;
                traffic.bytes_received += pkt;
                traffic.packets_received += 1;
                if (t.type[r] == BoxType::IMPORT) { traffic.imported_per_level[l] += 1; }
                ledger_.manager_bytes_sent += pkt;
                record("reply", -1, J, l, box, pkt);
            }
        }
    }
    if (!firstFailure.empty()) { throw RoutingError(firstFailure); }
}

void DataManager::write_trace(std::ostream& os) const
{
    os << "phase,from,to,level,box,bytes\n";
    auto who = [](int id) { return id < 0 ? std::string("manager") : std::to_string(id); };
    for (const auto& t : trace_)
    {
        os << t.phase << ',' << who(t.from) << ',' << who(t.to) << ',' << t.level << ',' << t.box << ',' << t.bytes
           << '\n';
    }
}

} // namespace fmmds
