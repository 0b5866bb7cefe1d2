/*! @file
 * @brief Interaction lists: E2 neighbor table, per-level E4 translation stencils and the
 *        single-node construction pipeline
 *
 * Every list refers to non-empty boxes only, through their rank (position) in the
 * corresponding compacted Morton index array, so consumers address data without search.
 */
#pragma once

#include "fmmds/container.hpp"
#include "fmmds/morton.hpp"
#include "fmmds/pseudosort.hpp"
#include "fmmds/scan.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fmmds
{

//! Compressed rows: segment j is list[bookmark[j] .. bookmark[j+1]).
struct SegmentTable
{
    std::vector<Count> bookmark{0};
    std::vector<Count> list;

    std::size_t num_segments() const { return bookmark.size() - 1; }
    std::span<const Count> segment(std::size_t j) const
    {
        return std::span<const Count>(list).subspan(bookmark[j], bookmark[j + 1] - bookmark[j]);
    }

    friend bool operator==(const SegmentTable&, const SegmentTable&) = default;
};

//! Per non-empty receiver box, the ranks of the non-empty source boxes in its E2 set.
using NeighborTable = SegmentTable;

/*! @brief Dense box -> compacted rank map over all 8^level boxes
 *
 * rank has 8^level + 1 entries: the exclusive scan of the occupancy flags followed by
 * the number of occupied boxes. Box b is occupied iff rank[b+1] > rank[b].
 */
struct DenseRankMap
{
    int                level{0};
    std::vector<Count> rank;

    bool  occupied(std::uint64_t box) const { return rank[box + 1] > rank[box]; }
    Count rank_of(std::uint64_t box) const { return rank[box]; }
    Count count() const { return rank.back(); }

    static DenseRankMap from_bins(int level, std::span<const Count> bins, unsigned workers = 0);
    //! non_empty must be strictly increasing Morton indices at this level.
    static DenseRankMap from_non_empty(int level, std::span<const std::uint64_t> non_empty, unsigned workers = 0);
};

NeighborTable build_neighbor_table(const DenseRankMap& sources, std::span<const std::uint64_t> recv_non_empty,
                                   unsigned workers = 0);

//! Source points in the E2 neighborhood of non-empty receiver box i, in neighbor-list order.
std::vector<ChargedPoint> gather_e2_sources(const NeighborTable& table, const SortedPointSet<ChargedPoint>& sources,
                                            std::size_t i);

//! Calls f(span of source points) once per non-empty source box adjacent to receiver box i.
template<class F>
void for_each_e2_source_box(const NeighborTable& table, const SortedPointSet<ChargedPoint>& sources, std::size_t i,
                            F&& f)
{
    for (Count v : table.segment(i))
    {
        f(sources.box_points(v));
    }
}

struct LevelBoxes
{
    std::vector<std::uint64_t> index;       //!< strictly increasing
    std::vector<Count>         parent_rank; //!< rank of each box's parent one level up; empty at level 0

    std::size_t size() const { return index.size(); }
    std::optional<Count> rank_of(std::uint64_t box) const;

    friend bool operator==(const LevelBoxes&, const LevelBoxes&) = default;
};

//! Non-empty source and receiver boxes at every level 0..l_max, by parent propagation.
struct LevelDirectory
{
    int                     l_max{0};
    std::vector<LevelBoxes> sources;
    std::vector<LevelBoxes> receivers;

    friend bool operator==(const LevelDirectory&, const LevelDirectory&) = default;
};

LevelDirectory build_level_directory(std::span<const std::uint64_t> src_non_empty,
                                     std::span<const std::uint64_t> recv_non_empty, int l_max);

//! Propagates one sorted set of finest-level boxes up to level 0.
std::vector<LevelBoxes> propagate_levels(std::span<const std::uint64_t> finest, int l_max);

/*! @brief Per level, per non-empty receiver box: ranks of the non-empty source boxes in its E4 set
 *
 * levels[l] has one segment per receiver box of directory.receivers[l]; levels 0 and 1
 * have only empty segments.
 */
struct TranslationStencils
{
    std::vector<SegmentTable> levels;

    friend bool operator==(const TranslationStencils&, const TranslationStencils&) = default;
};

TranslationStencils build_translation_stencils(const LevelDirectory& directory, unsigned workers = 0,
                                               std::size_t memory_budget_bytes = kDefaultHistogramBudget);

//! Everything the evaluation engine consumes, all indexed through non-empty box ranks.
struct FmmStructures
{
    int                          l_max{0};
    SortedPointSet<ChargedPoint> sources;
    SortedPointSet<Point3>       receivers;
    NeighborTable                neighbors;
    LevelDirectory               directory;
    TranslationStencils          stencils;

    friend bool operator==(const FmmStructures&, const FmmStructures&) = default;
};

struct PhaseTiming
{
    std::string name;
    double      seconds{0};
};

struct BuildOptions
{
    std::optional<int>         l_max;
    std::optional<std::size_t> cluster_size;
    SortOptions                sort;
};

//! Smallest level l with ceil(numPoints / 8^l) <= cluster_size, capped at kMaxLevel.
int level_for_cluster_size(std::size_t numPoints, std::size_t cluster_size);

/*! @brief Sort sources and receivers, then build bookmarks, neighbor table, directory and stencils
 *
 * Either options.l_max or options.cluster_size must be set; an explicit l_max wins. When
 * profile is non-null one entry per phase is appended.
 */
FmmStructures build_all(std::span<const ChargedPoint> sources, std::span<const Point3> receivers,
                        const BuildOptions& options, std::vector<PhaseTiming>* profile = nullptr);

ContainerSection structures_section(const FmmStructures& s);
FmmStructures    structures_from_section(const ContainerSection& section);

void          save_structures(std::ostream& os, const FmmStructures& s);
FmmStructures load_structures(std::istream& is);

} // namespace fmmds
