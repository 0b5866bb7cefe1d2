#include "fmmds/fmm.hpp"

#include "fmmds/errors.hpp"
#include "fmmds/parallel.hpp"

#include <algorithm>
#include <string>

namespace fmmds
{

namespace
{

constexpr int kOffsetSpan = 7; // E4 offsets lie in [-3, 3] per axis

int offset_slot(int dx, int dy, int dz) { return ((dx + 3) * kOffsetSpan + (dy + 3)) * kOffsetSpan + (dz + 3); }

void check_p(int p)
{
    if (p < 1 || p > kMaxOrder)
    {
        throw DomainError("truncation number p=" + std::to_string(p) + " outside [1, " + std::to_string(kMaxOrder) +
                          "]");
    }
}

// a += b * c without the library's NaN-recovery path
inline void mul_add(Complex& a, const Complex& b, const Complex& c)
{
    a = Complex(a.real() + b.real() * c.real() - b.imag() * c.imag(),
                a.imag() + b.real() * c.imag() + b.imag() * c.real());
}

void clean_m0(int p, Complex* t)
{
    for (int n = 0; n < p; ++n)
    {
        t[tri_index(n, 0)].imag(0.0);
    }
}

// Translation kernels. R and S tables are full-layout and evaluated at unit width; the real
// geometry is w = 2^-level times the unit one, so R_j scales by w^j and S_j by w^-(j+1).

void up_core(int p, const Complex* src, const Complex* rhat, int level, Complex* dst)
{
    // dst_n^m += sum_{k,l} src_k^l w^(n-k) R_{n-k}^{m-l}
    std::vector<Complex> s(std::size_t(p) * p);
    for (int k = 0; k < p; ++k)
    {
        double scale = std::ldexp(1.0, level * k);
        for (int l = -k; l <= k; ++l)
        {
            s[packed_index(k, l)] = tri_get(src, k, l) * scale;
        }
    }
    for (int n = 0; n < p; ++n)
    {
        double scale = std::ldexp(1.0, -level * n);
        for (int m = 0; m <= n; ++m)
        {
            Complex acc = 0;
            for (int k = 0; k <= n; ++k)
            {
                int j  = n - k;
                int lo = std::max(-k, m - j);
                int hi = std::min(k, m + j);
                for (int l = lo; l <= hi; ++l)
                {
                    mul_add(acc, s[packed_index(k, l)], rhat[packed_index(j, m - l)]);
                }
            }
            dst[tri_index(n, m)] += acc * scale;
        }
    }
    clean_m0(p, dst);
}

void down_core(int p, const Complex* src, const Complex* rhat, int level, Complex* dst)
{
    // dst_k^l += sum_{n>=k, m} src_n^m w^(n-k) R_{n-k}^{m-l}
    std::vector<Complex> s(std::size_t(p) * p);
    for (int n = 0; n < p; ++n)
    {
        double scale = std::ldexp(1.0, -level * n);
        for (int m = -n; m <= n; ++m)
        {
            s[packed_index(n, m)] = tri_get(src, n, m) * scale;
        }
    }
    for (int k = 0; k < p; ++k)
    {
        double scale = std::ldexp(1.0, level * k);
        for (int l = 0; l <= k; ++l)
        {
            Complex acc = 0;
            for (int n = k; n < p; ++n)
            {
                int j  = n - k;
                int lo = std::max(-n, l - j);
                int hi = std::min(n, l + j);
                for (int m = lo; m <= hi; ++m)
                {
                    mul_add(acc, s[packed_index(n, m)], rhat[packed_index(j, m - l)]);
                }
            }
            dst[tri_index(k, l)] += acc * scale;
        }
    }
    clean_m0(p, dst);
}

// M given in full layout already multiplied by w^-n
void m2l_core(int p, const Complex* mscaled, const Complex* shat, int level, Complex* dst)
{
    for (int k = 0; k < p; ++k)
    {
        double scale = std::ldexp((k & 1) ? -1.0 : 1.0, level * (k + 1));
        for (int l = 0; l <= k; ++l)
        {
            double ar = 0, ai = 0;
            for (int n = 0; n < p; ++n)
            {
                const Complex* s  = shat + packed_index(n + k, l);
                const Complex* mm = mscaled + packed_index(n, 0);
                for (int m = -n; m <= n; ++m)
                {
                    double a = mm[m].real(), b = mm[m].imag();
                    double c = s[m].real(), d = s[m].imag();
                    ar += a * c - b * d;
                    ai += a * d + b * c;
                }
            }
            dst[tri_index(k, l)] += Complex(ar * scale, l == 0 ? 0.0 : ai * scale);
        }
    }
}

void scale_full(int p, const Complex* tri, int level, Complex* full)
{
    for (int n = 0; n < p; ++n)
    {
        double scale = std::ldexp(1.0, level * n);
        for (int m = -n; m <= n; ++m)
        {
            full[packed_index(n, m)] = tri_get(tri, n, m) * scale;
        }
    }
}

std::vector<Complex> full_regular(int p, const Point3& t)
{
    std::vector<Complex> tri(tri_size(p)), full(std::size_t(p) * p);
    regular_harmonics(p, t, tri.data());
    expand_full(p, tri.data(), full.data());
    return full;
}

std::vector<Complex> full_irregular(int q, const Point3& d)
{
    std::vector<Complex> tri(tri_size(q)), full(std::size_t(q) * q);
    irregular_harmonics(q, d, tri.data());
    expand_full(q, tri.data(), full.data());
    return full;
}

Point3 minus(const Point3& a, const Point3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }

std::vector<Complex> unpacked(const Expansion& e)
{
    check_p(e.p);
    if (e.coefficients.size() != std::size_t(e.p) * e.p)
    {
        throw DomainError("expansion coefficient count differs from p^2");
    }
    std::vector<Complex> tri(tri_size(e.p));
    unpack_real(e.p, e.coefficients.data(), tri.data());
    return tri;
}

Expansion packed(ExpansionKind kind, const Point3& center, int p, const std::vector<Complex>& tri)
{
    Expansion e{kind, center, p, std::vector<double>(std::size_t(p) * p)};
    pack_real(p, tri.data(), e.coefficients.data());
    return e;
}

double folded_dot(int p, const Complex* a, const Complex* b)
{
    double sum = 0;
    for (int n = 0; n < p; ++n)
    {
        sum += a[tri_index(n, 0)].real() * b[tri_index(n, 0)].real();
        for (int m = 1; m <= n; ++m)
        {
            const Complex& x = a[tri_index(n, m)];
            const Complex& y = b[tri_index(n, m)];
            sum += 2 * (x.real() * y.real() - x.imag() * y.imag());
        }
    }
    return sum;
}

Point3 octant_offset(int octant)
{
    return {(octant & 1) ? 0.5 : -0.5, (octant & 2) ? 0.5 : -0.5, (octant & 4) ? 0.5 : -0.5};
}

} // namespace

std::vector<double> direct_sum(std::span<const ChargedPoint> sources, std::span<const Point3> receivers,
                               unsigned workers)
{
    std::vector<double> out(receivers.size());
    parallel_for(receivers.size(), workers, [&](std::size_t j) {
        double acc = 0;
        for (const auto& s : sources)
        {
            acc += laplace_term(s.q, s.position, receivers[j]);
        }
        out[j] = acc;
    });
    return out;
}

Expansion p2m(int p, const Point3& center, std::span<const ChargedPoint> sources)
{
    check_p(p);
    std::vector<Complex> m(tri_size(p)), r(tri_size(p));
    for (const auto& s : sources)
    {
        regular_harmonics(p, minus(s.position, center), r.data());
        for (std::size_t i = 0; i < r.size(); ++i)
        {
            m[i] += s.q * r[i];
        }
    }
    return packed(ExpansionKind::multipole, center, p, m);
}

Expansion p2l(int p, const Point3& center, std::span<const ChargedPoint> sources)
{
    check_p(p);
    std::vector<Complex> l(tri_size(p)), s(tri_size(p));
    for (const auto& src : sources)
    {
        irregular_harmonics(p, minus(src.position, center), s.data());
        for (std::size_t i = 0; i < s.size(); ++i)
        {
            l[i] += src.q * s[i];
        }
    }
    return packed(ExpansionKind::local, center, p, l);
}

Expansion m2m(const Expansion& m, const Point3& new_center)
{
    if (m.kind != ExpansionKind::multipole) { throw DomainError("m2m needs a multipole expansion"); }
    auto src = unpacked(m);
    auto r   = full_regular(m.p, minus(m.center, new_center));
    std::vector<Complex> dst(tri_size(m.p));
    up_core(m.p, src.data(), r.data(), 0, dst.data());
    return packed(ExpansionKind::multipole, new_center, m.p, dst);
}

Expansion m2l(const Expansion& m, const Point3& local_center)
{
    if (m.kind != ExpansionKind::multipole) { throw DomainError("m2l needs a multipole expansion"); }
    auto src = unpacked(m);
    auto s   = full_irregular(2 * m.p - 1, minus(local_center, m.center));
    std::vector<Complex> full(std::size_t(m.p) * m.p), dst(tri_size(m.p));
    scale_full(m.p, src.data(), 0, full.data());
    m2l_core(m.p, full.data(), s.data(), 0, dst.data());
    return packed(ExpansionKind::local, local_center, m.p, dst);
}

Expansion m2l(const Expansion& m, const MortonKey& source, const MortonKey& receiver)
{
    if (!is_e4_neighbor(receiver, source))
    {
        throw DomainError("m2l: source box " + std::to_string(source.index) + " is not in the E4 set of receiver box " +
                          std::to_string(receiver.index) + " at level " + std::to_string(receiver.level));
    }
    Expansion centred = m;
    if (!(m.center == box_center(source))) { throw DomainError("m2l: multipole not centred on its source box"); }
    return m2l(centred, box_center(receiver));
}

Expansion l2l(const Expansion& l, const Point3& new_center)
{
    if (l.kind != ExpansionKind::local) { throw DomainError("l2l needs a local expansion"); }
    auto src = unpacked(l);
    auto r   = full_regular(l.p, minus(new_center, l.center));
    std::vector<Complex> dst(tri_size(l.p));
    down_core(l.p, src.data(), r.data(), 0, dst.data());
    return packed(ExpansionKind::local, new_center, l.p, dst);
}

double evaluate_expansion(const Expansion& e, const Point3& y)
{
    auto                 c = unpacked(e);
    std::vector<Complex> basis(tri_size(e.p));
    if (e.kind == ExpansionKind::multipole) { irregular_harmonics(e.p, minus(y, e.center), basis.data()); }
    else { regular_harmonics(e.p, minus(y, e.center), basis.data()); }
    return folded_dot(e.p, c.data(), basis.data());
}

FmmOperators::FmmOperators(int p)
    : p_(p)
{
    check_p(p);
    const int         q     = 2 * p - 1;
    const std::size_t sSize = std::size_t(q) * q;
    s_tables_.assign(std::size_t(kOffsetSpan * kOffsetSpan * kOffsetSpan) * sSize, 0.0);
    for (int dx = -3; dx <= 3; ++dx)
    {
        for (int dy = -3; dy <= 3; ++dy)
        {
            for (int dz = -3; dz <= 3; ++dz)
            {
                if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) <= 1) continue;
                // receiver centre minus source centre, in units of the box width
                auto s = full_irregular(q, {-double(dx), -double(dy), -double(dz)});
                std::copy(s.begin(), s.end(), s_tables_.begin() + offset_slot(dx, dy, dz) * sSize);
            }
        }
    }
    r_tables_.resize(8 * std::size_t(p) * p);
    for (int o = 0; o < 8; ++o)
    {
        auto r = full_regular(p, octant_offset(o));
        std::copy(r.begin(), r.end(), r_tables_.begin() + o * std::size_t(p) * p);
    }
}

void FmmOperators::p2m(std::span<const ChargedPoint> sources, const Point3& center, Complex* m) const
{
    std::vector<Complex> r(block());
    for (const auto& s : sources)
    {
        regular_harmonics(p_, minus(s.position, center), r.data());
        for (std::size_t i = 0; i < r.size(); ++i)
        {
            m[i] += s.q * r[i];
        }
    }
}

void FmmOperators::m2m(const Complex* child, int child_level, int octant, Complex* parent) const
{
    // child centre minus parent centre is octant_offset * child width
    up_core(p_, child, r_tables_.data() + octant * std::size_t(p_) * p_, child_level, parent);
}

void FmmOperators::prescale(const Complex* m, int level, Complex* full) const { scale_full(p_, m, level, full); }

void FmmOperators::m2l_prescaled(const Complex* full, int level, int dx, int dy, int dz, Complex* l) const
{
    int reach = std::max({std::abs(dx), std::abs(dy), std::abs(dz)});
    if (reach <= 1 || reach > 3) { throw DomainError("m2l offset outside the E4 range"); }
    const std::size_t sSize = std::size_t(2 * p_ - 1) * (2 * p_ - 1);
    m2l_core(p_, full, s_tables_.data() + offset_slot(dx, dy, dz) * sSize, level, l);
}

void FmmOperators::m2l(const Complex* m, int level, int dx, int dy, int dz, Complex* l) const
{
    std::vector<Complex> full(std::size_t(p_) * p_);
    prescale(m, level, full.data());
    m2l_prescaled(full.data(), level, dx, dy, dz, l);
}

void FmmOperators::l2l(const Complex* parent, int child_level, int octant, Complex* child) const
{
    down_core(p_, parent, r_tables_.data() + octant * std::size_t(p_) * p_, child_level, child);
}

void FmmOperators::l2p(const Complex* l, const Point3& center, std::span<const Point3> ys, double* out) const
{
    std::vector<Complex> r(block());
    for (std::size_t j = 0; j < ys.size(); ++j)
    {
        regular_harmonics(p_, minus(ys[j], center), r.data());
        out[j] += folded_dot(p_, l, r.data());
    }
}

std::vector<Count> child_ranges(const LevelBoxes& children, std::size_t numParents)
{
    std::vector<Count> begin(numParents + 1, Count(children.size()));
    for (std::size_t c = children.size(); c-- > 0;)
    {
        begin[children.parent_rank[c]] = Count(c);
    }
    // parents are all non-empty, so each has at least one child; keep ranges monotone anyway
    for (std::size_t j = numParents; j-- > 0;)
    {
        begin[j] = std::min(begin[j], begin[j + 1]);
    }
    return begin;
}

LevelCoefficients allocate_coefficients(const std::vector<LevelBoxes>& levels, const FmmOperators& ops)
{
    LevelCoefficients c(levels.size());
    for (std::size_t l = 2; l < levels.size(); ++l)
    {
        c[l].assign(levels[l].size() * ops.block(), 0.0);
    }
    return c;
}

void p2m_finest(const FmmStructures& s, const FmmOperators& ops, LevelCoefficients& m, unsigned workers)
{
    const int         l = s.l_max;
    const std::size_t B = ops.block();
    parallel_for(s.sources.num_boxes(), workers, [&](std::size_t i) {
        ops.p2m(s.sources.box_points(i), box_center({l, s.sources.non_empty_index[i]}), m[l].data() + i * B);
    });
}

void m2m_level(const LevelDirectory& dir, int child_level, const FmmOperators& ops, LevelCoefficients& m,
               const std::vector<std::uint8_t>* present, std::vector<std::uint32_t>* tally, unsigned workers)
{
    const auto&       kids   = dir.sources[child_level];
    const std::size_t B      = ops.block();
    auto              ranges = child_ranges(kids, dir.sources[child_level - 1].size());
    parallel_for(ranges.size() - 1, workers, [&](std::size_t j) {
        for (Count c = ranges[j]; c < ranges[j + 1]; ++c)
        {
            if (present && !(*present)[c]) continue;
            ops.m2m(m[child_level].data() + c * B, child_level, int(kids.index[c] & 7),
                    m[child_level - 1].data() + j * B);
            if (tally) { ++(*tally)[c]; }
        }
    });
}

void downward_pass(const LevelDirectory& dir, const TranslationStencils& stencils, const FmmOperators& ops,
                   const LevelCoefficients& m, LevelCoefficients& l,
                   const std::vector<std::vector<std::uint8_t>>* active, unsigned workers)
{
    const std::size_t B    = ops.block();
    const int         p    = ops.p();
    const std::size_t full = std::size_t(p) * p;

    for (int level = 2; level <= dir.l_max; ++level)
    {
        const auto& src  = dir.sources[level];
        const auto& recv = dir.receivers[level];

        // w^-n scaled full-layout M for every source box, reused by every receiver that needs it
        std::vector<Complex>   mfull(src.size() * full);
        std::vector<BoxCoords> srcCoords(src.size());
        parallel_for(src.size(), workers, [&](std::size_t i) {
            ops.prescale(m[level].data() + i * B, level, mfull.data() + i * full);
            srcCoords[i] = deinterleave({level, src.index[i]});
        });

        parallel_for(recv.size(), workers, [&](std::size_t r) {
            if (active && !(*active)[level][r]) return;
            Complex* out = l[level].data() + r * B;
            if (level > 2)
            {
                ops.l2l(l[level - 1].data() + recv.parent_rank[r] * B, level, int(recv.index[r] & 7), out);
            }
            BoxCoords rc = deinterleave({level, recv.index[r]});
            for (Count v : stencils.levels[level].segment(r))
            {
                const BoxCoords& sc = srcCoords[v];
                int dx = int(sc.ix) - int(rc.ix), dy = int(sc.iy) - int(rc.iy), dz = int(sc.iz) - int(rc.iz);
                ops.m2l_prescaled(mfull.data() + v * full, level, dx, dy, dz, out);
            }
        });
    }
}

void near_field_box(const NeighborTable& neighbors, const SortedPointSet<ChargedPoint>& sources,
                    const SortedPointSet<Point3>& receivers, std::size_t i, double* out)
{
    for (std::size_t j = receivers.box_begin(i); j < receivers.box_end(i); ++j)
    {
        const Point3& y   = receivers.points[j];
        double        acc = 0;
        for (Count v : neighbors.segment(i))
        {
            for (const auto& s : sources.box_points(v))
            {
                acc += laplace_term(s.q, s.position, y);
            }
        }
        out[j] += acc;
    }
}

LevelCoefficients compute_multipoles(const FmmStructures& s, int p, unsigned workers)
{
    FmmOperators      ops(p);
    LevelCoefficients m = allocate_coefficients(s.directory.sources, ops);
    if (s.l_max < 2) return m;
    p2m_finest(s, ops, m, workers);
    for (int l = s.l_max; l > 2; --l)
    {
        m2m_level(s.directory, l, ops, m, nullptr, nullptr, workers);
    }
    return m;
}

std::vector<double> evaluate(const FmmStructures& s, const EvaluateOptions& options)
{
    check_p(options.p);
    if (s.directory.l_max != s.l_max || s.sources.level != s.l_max || s.receivers.level != s.l_max ||
        s.neighbors.num_segments() != s.receivers.num_boxes())
    {
        throw DomainError("evaluate: structures are inconsistent with their point sets");
    }
    const unsigned      workers = options.workers;
    std::vector<double> sorted(s.receivers.points.size(), 0.0);

    if (options.near_field)
    {
        parallel_for(s.receivers.num_boxes(), workers,
                     [&](std::size_t i) { near_field_box(s.neighbors, s.sources, s.receivers, i, sorted.data()); });
    }

    if (options.far_field && s.l_max >= 2)
    {
        FmmOperators      ops(options.p);
        LevelCoefficients m = allocate_coefficients(s.directory.sources, ops);
        p2m_finest(s, ops, m, workers);
        for (int l = s.l_max; l > 2; --l)
        {
            m2m_level(s.directory, l, ops, m, nullptr, nullptr, workers);
        }
        LevelCoefficients loc = allocate_coefficients(s.directory.receivers, ops);
        downward_pass(s.directory, s.stencils, ops, m, loc, nullptr, workers);
        const std::size_t B = ops.block();
        parallel_for(s.receivers.num_boxes(), workers, [&](std::size_t i) {
            ops.l2p(loc[s.l_max].data() + i * B, box_center({s.l_max, s.receivers.non_empty_index[i]}),
                    s.receivers.box_points(i), sorted.data() + s.receivers.box_begin(i));
        });
    }

    std::vector<double> out(sorted.size());
    for (std::size_t j = 0; j < sorted.size(); ++j)
    {
        out[s.receivers.permutation[j]] = sorted[j];
    }
    return out;
}

std::vector<std::uint64_t> pathway_counts(const FmmStructures& s)
{
    const auto&                             dir = s.directory;
    std::vector<std::vector<std::uint64_t>> m(s.l_max + 1), l(s.l_max + 1);
    for (int lv = 0; lv <= s.l_max; ++lv)
    {
        m[lv].assign(dir.sources[lv].size(), 0);
        l[lv].assign(dir.receivers[lv].size(), 0);
    }
    for (std::size_t i = 0; i < s.sources.num_boxes(); ++i)
    {
        m[s.l_max][i] = s.sources.box_end(i) - s.sources.box_begin(i);
    }
    for (int lv = s.l_max; lv > 2; --lv)
    {
        for (std::size_t c = 0; c < dir.sources[lv].size(); ++c)
        {
            m[lv - 1][dir.sources[lv].parent_rank[c]] += m[lv][c];
        }
    }
    for (int lv = 2; lv <= s.l_max; ++lv)
    {
        for (std::size_t r = 0; r < dir.receivers[lv].size(); ++r)
        {
            std::uint64_t acc = lv > 2 ? l[lv - 1][dir.receivers[lv].parent_rank[r]] : 0;
            for (Count v : s.stencils.levels[lv].segment(r))
            {
                acc += m[lv][v];
            }
            l[lv][r] = acc;
        }
    }

    std::vector<std::uint64_t> out(s.receivers.points.size());
    for (std::size_t i = 0; i < s.receivers.num_boxes(); ++i)
    {
        std::uint64_t total = s.l_max >= 2 ? l[s.l_max][i] : 0;
        for (Count v : s.neighbors.segment(i))
        {
            total += s.sources.box_end(v) - s.sources.box_begin(v);
        }
        for (std::size_t j = s.receivers.box_begin(i); j < s.receivers.box_end(i); ++j)
        {
            out[s.receivers.permutation[j]] = total;
        }
    }
    return out;
}

} // namespace fmmds
