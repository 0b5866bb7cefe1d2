/*! @file
 * @brief Per-node classification of non-empty source boxes for the multi-node exchange
 *
 * Levels below l_crit are computed redundantly on every node. At l_crit each box is ROOT
 * when its level-l_par descendants span several nodes including this one, IMPORT when none
 * of them is here, and otherwise wholly local: EXPORT if there is more than one node (every
 * node needs complete l_crit data to finish the upward pass), DOMESTIC for a single node.
 * Above l_crit ownership follows the level-l_par ancestor: a local box with an off-node
 * position in its E4 set is EXPORT, a remote box with a local position in its E4 set is
 * IMPORT, remaining remote boxes are OTHER.
 */
#pragma once

#include "fmmds/container.hpp"
#include "fmmds/lists.hpp"
#include "fmmds/partition.hpp"

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace fmmds
{

enum class BoxType : std::uint8_t
{
    DOMESTIC = 0,
    EXPORT   = 1,
    IMPORT   = 2,
    ROOT     = 3,
    OTHER    = 4,
};

std::string_view to_string(BoxType t);

struct TypedLevel
{
    int                        level{0};
    std::vector<std::uint64_t> index; //!< the level's non-empty source boxes, ascending
    std::vector<BoxType>       type;
    std::vector<Count>         exports; //!< ranks into index, ascending
    std::vector<Count>         imports;
    std::vector<Count>         roots;

    friend bool operator==(const TypedLevel&, const TypedLevel&) = default;
};

struct TypedBoxList
{
    int                     node{0};
    int                     l_crit{2};
    int                     l_max{2};
    std::vector<TypedLevel> levels; //!< indexed by level; levels 0 and 1 stay empty

    //! Type of a non-empty source box. DomainError below level 2 or for unknown boxes.
    BoxType type_of(const MortonKey& key) const;

    friend bool operator==(const TypedBoxList&, const TypedBoxList&) = default;
};

struct ClassifyOptions
{
    unsigned                     workers{0};
    std::optional<std::uint64_t> shuffle_seed; //!< visit boxes in a shuffled order
};

/*! @brief Types of every non-empty source box at levels 2..l_max on one node
 *
 * Marks are set with atomic OR in a first pass over the boxes and resolved after all
 * workers finish, so the result does not depend on the visiting order.
 */
TypedBoxList classify(int node, const LevelDirectory& dir, const PartitionPlan& plan,
                      const ClassifyOptions& options = {});

ContainerSection boxtype_section(std::span<const TypedBoxList> lists);
std::vector<TypedBoxList> boxtypes_from_section(const ContainerSection& section);

} // namespace fmmds
