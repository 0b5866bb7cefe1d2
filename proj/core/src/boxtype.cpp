#include "fmmds/boxtype.hpp"

#include "fmmds/errors.hpp"
#include "fmmds/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>
#include <random>
#include <string>

namespace fmmds
{

namespace
{

constexpr std::uint8_t kExportMark = 1;
constexpr std::uint8_t kImportMark = 2;

void mark(std::uint8_t& flag, std::uint8_t bit)
{
    std::atomic_ref<std::uint8_t>(flag).fetch_or(bit, std::memory_order_relaxed);
}

void finish_lists(TypedLevel& t)
{
    for (std::size_t i = 0; i < t.type.size(); ++i)
    {
        switch (t.type[i])
        {
        case BoxType::EXPORT: t.exports.push_back(Count(i)); break;
        case BoxType::IMPORT: t.imports.push_back(Count(i)); break;
        case BoxType::ROOT: t.roots.push_back(Count(i)); break;
        default: break;
        }
    }
}

} // namespace

std::string_view to_string(BoxType t)
{
    switch (t)
    {
    case BoxType::DOMESTIC: return "DOMESTIC";
    case BoxType::EXPORT: return "EXPORT";
    case BoxType::IMPORT: return "IMPORT";
    case BoxType::ROOT: return "ROOT";
    case BoxType::OTHER: return "OTHER";
    }
    return "?";
}

BoxType TypedBoxList::type_of(const MortonKey& key) const
{
    if (key.level < 2) { throw DomainError("box types start at level 2"); }
    if (key.level >= int(levels.size())) { throw DomainError("box level beyond the classified tree"); }
    const auto& t  = levels[key.level];
    auto        it = std::lower_bound(t.index.begin(), t.index.end(), key.index);
    if (it == t.index.end() || *it != key.index) { throw DomainError("box is not a non-empty source box"); }
    return t.type[it - t.index.begin()];
}

TypedBoxList classify(int node, const LevelDirectory& dir, const PartitionPlan& plan, const ClassifyOptions& options)
{
    if (dir.l_max < 2) { throw DomainError("classification needs l_max >= 2"); }
    if (plan.l_par > dir.l_max) { throw DomainError("partition level below the finest level"); }
    if (node < 0 || node >= plan.nodes) { throw DomainError("node id out of range"); }

    TypedBoxList out;
    out.node   = node;
    out.l_crit = plan.l_crit;
    out.l_max  = dir.l_max;
    out.levels.resize(dir.l_max + 1);

    for (int l = 2; l <= dir.l_max; ++l)
    {
        const auto& boxes = dir.sources[l];
        TypedLevel& t     = out.levels[l];
        t.level           = l;
        t.index           = boxes.index;
        t.type.assign(boxes.size(), BoxType::DOMESTIC);
        const std::size_t n = boxes.size();

        std::vector<Count> order(n);
        std::iota(order.begin(), order.end(), Count(0));
        if (options.shuffle_seed)
        {
            std::mt19937_64 rng(*options.shuffle_seed + std::uint64_t(l));
            std::shuffle(order.begin(), order.end(), rng);
        }

        if (l < plan.l_crit)
        {
            // every node recomputes these from complete l_crit data
        }
        else if (l == plan.l_crit)
        {
            parallel_for(n, options.workers, [&](std::size_t k) {
                Count  i = order[k];
                Owners o = owner_of({l, boxes.index[i]}, plan);
                if (node < o.first_node || node > o.last_node) { t.type[i] = BoxType::IMPORT; }
                else if (o.first_node != o.last_node) { t.type[i] = BoxType::ROOT; }
                else { t.type[i] = plan.nodes > 1 ? BoxType::EXPORT : BoxType::DOMESTIC; }
            });
        }
        else
        {
            std::vector<std::uint8_t> flags(n, 0);
            // marking: local boxes flag themselves and push IMPORT onto remote source boxes in
            // their stencil; remote boxes also pull, which covers local positions without sources
            parallel_for(n, options.workers, [&](std::size_t k) {
                Count     i     = order[k];
                MortonKey key{l, boxes.index[i]};
                bool      local = node_of(key, plan) == node;
                for_each_e4_neighbor(key, [&](std::uint64_t q, int, int, int) {
                    bool qLocal = node_of({l, q}, plan) == node;
                    if (local && !qLocal)
                    {
                        mark(flags[i], kExportMark);
                        if (auto r = boxes.rank_of(q)) { mark(flags[*r], kImportMark); }
                    }
                    if (!local && qLocal) { mark(flags[i], kImportMark); }
                });
            });
            // resolution after the barrier
            parallel_for(n, options.workers, [&](std::size_t i) {
                bool local = node_of({l, boxes.index[i]}, plan) == node;
                if (local) { t.type[i] = (flags[i] & kExportMark) ? BoxType::EXPORT : BoxType::DOMESTIC; }
                else { t.type[i] = (flags[i] & kImportMark) ? BoxType::IMPORT : BoxType::OTHER; }
            });
        }
        finish_lists(t);
    }
    return out;
}

ContainerSection boxtype_section(std::span<const TypedBoxList> lists)
{
    ByteWriter w;
    w.u64(lists.size());
    for (const auto& list : lists)
    {
        w.u32(std::uint32_t(list.node));
        w.u32(std::uint32_t(list.l_crit));
        w.u32(std::uint32_t(list.l_max));
        for (int l = 2; l <= list.l_max; ++l)
        {
            const auto& t = list.levels[l];
            w.array_u64(t.index);
            w.array<BoxType>(t.type, [](ByteWriter& bw, BoxType b) { bw.u8(std::uint8_t(b)); });
        }
    }
    return {ContainerSection::make_tag("BTYP"), w.release()};
}

std::vector<TypedBoxList> boxtypes_from_section(const ContainerSection& section)
{
    if (section.tag != ContainerSection::make_tag("BTYP")) { throw FormatError("not a BTYP section"); }
    ByteReader                r(section.payload);
    std::vector<TypedBoxList> out(r.array_length(12));
    for (auto& list : out)
    {
        list.node   = int(r.u32());
        list.l_crit = int(r.u32());
        list.l_max  = int(r.u32());
        if (list.l_max < 2 || list.l_max > kMaxLevel) { throw FormatError("BTYP level out of range"); }
        list.levels.resize(list.l_max + 1);
        for (int l = 2; l <= list.l_max; ++l)
        {
            auto& t = list.levels[l];
            t.level = l;
            t.index = r.array_u64();
            std::size_t n = r.array_length(1);
            if (n != t.index.size()) { throw FormatError("BTYP index and type arrays differ in length"); }
            t.type.resize(n);
            for (auto& b : t.type)
            {
                std::uint8_t v = r.u8();
                if (v > std::uint8_t(BoxType::OTHER)) { throw FormatError("unknown box type"); }
                b = BoxType(v);
            }
            finish_lists(t);
        }
    }
    if (!r.at_end()) { throw FormatError("trailing bytes in BTYP section"); }
    return out;
}

} // namespace fmmds
