/*! @file
 * @brief Laplace-kernel FMM: expansions, translation operators, direct sum and the
 *        single-node evaluator over FmmStructures
 *
 * Internally coefficients are complex, m >= 0 only (see harmonics.hpp). Box-to-box
 * translations use tables computed once at unit box width and rescaled by powers of two,
 * so each of the 316 M2L offsets and 8 child offsets is tabulated once for all levels.
 */
#pragma once

#include "fmmds/harmonics.hpp"
#include "fmmds/lists.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace fmmds
{

//! q / |y - x|, or 0 when the points coincide.
inline double laplace_term(double q, const Point3& x, const Point3& y)
{
    double dx = y.x - x.x;
    double dy = y.y - x.y;
    double dz = y.z - x.z;
    double r2 = dx * dx + dy * dy + dz * dz;
    return r2 > 0 ? q / std::sqrt(r2) : 0.0;
}

//! phi(y_j) = sum_i q_i / |y_j - x_i|, sources visited in input order.
std::vector<double> direct_sum(std::span<const ChargedPoint> sources, std::span<const Point3> receivers,
                               unsigned workers = 0);

enum class ExpansionKind
{
    multipole,
    local,
};

//! Coefficients in the real-packed layout of harmonics.hpp (p^2 values).
struct Expansion
{
    ExpansionKind       kind{ExpansionKind::multipole};
    Point3              center;
    int                 p{1};
    std::vector<double> coefficients;
};

Expansion p2m(int p, const Point3& center, std::span<const ChargedPoint> sources);
Expansion p2l(int p, const Point3& center, std::span<const ChargedPoint> sources);
Expansion m2m(const Expansion& m, const Point3& new_center);
Expansion m2l(const Expansion& m, const Point3& local_center);
//! Box-checked M2L: DomainError unless source is in the E4 set of receiver.
Expansion m2l(const Expansion& m, const MortonKey& source, const MortonKey& receiver);
Expansion l2l(const Expansion& l, const Point3& new_center);
//! Potential of an expansion at y (multipole: outside, local: inside its region of validity).
double evaluate_expansion(const Expansion& e, const Point3& y);

/*! @brief Box-centred translation kernels at a fixed order p
 *
 * Coefficient blocks are tri_size(p) complex values. Levels give the box width 2^-level,
 * octants the child position (bit 0 x, bit 1 y, bit 2 z), and (dx, dy, dz) the grid
 * offset of the source box from the receiver box.
 */
class FmmOperators
{
public:
    explicit FmmOperators(int p);

    int         p() const { return p_; }
    std::size_t block() const { return tri_size(p_); }

    void   p2m(std::span<const ChargedPoint> sources, const Point3& center, Complex* m) const;
    void   m2m(const Complex* child, int child_level, int octant, Complex* parent) const;
    void   m2l(const Complex* m, int level, int dx, int dy, int dz, Complex* l) const;
    //! Full-layout M with degree n multiplied by 2^(level n), as consumed by m2l_prescaled.
    void   prescale(const Complex* m, int level, Complex* full) const;
    void   m2l_prescaled(const Complex* full, int level, int dx, int dy, int dz, Complex* l) const;
    void   l2l(const Complex* parent, int child_level, int octant, Complex* child) const;
    //! Adds the local-expansion potential at each y to out.
    void   l2p(const Complex* l, const Point3& center, std::span<const Point3> ys, double* out) const;

private:
    int                  p_;
    std::vector<Complex> s_tables_; //!< 7^3 offsets x (2p-1)^2, unit width, full layout
    std::vector<Complex> r_tables_; //!< 8 octants x p^2, unit child width, full layout
};

//! Per level 0..l_max, tri_size(p) complex values per box of the matching directory level.
using LevelCoefficients = std::vector<std::vector<Complex>>;

//! For parent rank j, its children at the next level are ranks [begin[j], begin[j+1]).
std::vector<Count> child_ranges(const LevelBoxes& children, std::size_t numParents);

//! P2M for every finest-level source box of s, into m[l_max].
void p2m_finest(const FmmStructures& s, const FmmOperators& ops, LevelCoefficients& m, unsigned workers = 0);

/*! @brief M2M from child_level into child_level - 1
 *
 * present (optional) selects which children carry data; parents receive the sum in child
 * order. tally (optional) counts one contribution per child used.
 */
void m2m_level(const LevelDirectory& dir, int child_level, const FmmOperators& ops, LevelCoefficients& m,
               const std::vector<std::uint8_t>* present = nullptr, std::vector<std::uint32_t>* tally = nullptr,
               unsigned workers = 0);

/*! @brief M2L and L2L for levels 2..l_max into l
 *
 * active (optional, per level) restricts which receiver boxes are computed; an active box
 * must have an active parent from level 3 on. m must hold complete data for every source
 * box reached by an active receiver's stencil.
 */
void downward_pass(const LevelDirectory& dir, const TranslationStencils& stencils, const FmmOperators& ops,
                   const LevelCoefficients& m, LevelCoefficients& l,
                   const std::vector<std::vector<std::uint8_t>>* active = nullptr, unsigned workers = 0);

//! Zero-initialised coefficient storage for every level of a directory side.
LevelCoefficients allocate_coefficients(const std::vector<LevelBoxes>& levels, const FmmOperators& ops);

//! Near-field sum for the receivers of sorted box i, added to out (indexed by sorted slot).
void near_field_box(const NeighborTable& neighbors, const SortedPointSet<ChargedPoint>& sources,
                    const SortedPointSet<Point3>& receivers, std::size_t i, double* out);

struct EvaluateOptions
{
    int      p{8};
    bool     near_field{true};
    bool     far_field{true};
    unsigned workers{0};
};

/*! @brief FMM potentials in original receiver order
 *
 * Near field: E2 sources per receiver box in neighbor-list then within-box order. Far field:
 * P2M, M2M up to level 2, M2L per stencil, L2L down to l_max, L2P.
 */
std::vector<double> evaluate(const FmmStructures& s, const EvaluateOptions& options);

//! M-data of every source box at levels 2..l_max (levels 0 and 1 left empty).
LevelCoefficients compute_multipoles(const FmmStructures& s, int p, unsigned workers = 0);

/*! @brief Number of sources reaching each receiver (original order) across near and far pathways
 *
 * Runs the evaluator's traversal with counts instead of coefficients; every entry equals the
 * source count iff each source reaches each receiver exactly once.
 */
std::vector<std::uint64_t> pathway_counts(const FmmStructures& s);

} // namespace fmmds
