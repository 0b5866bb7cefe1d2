/*! @file
 * @brief Solid harmonics for the 3D Laplace kernel
 *
 * Regular harmonics R_n^m are the coefficients of exp(t (z + w/(2s) - conj(w) s/2)), w = x + iy,
 * which gives the addition theorem R_n^m(a + b) = sum_{k,l} R_k^l(a) R_{n-k}^{m-l}(b) with no
 * normalisation constants. Irregular harmonics are
 *     S_n^m(y) = (n-|m|)! (n+|m|)! conj(R_n^m(y)) / |y|^(2n+1)
 * and 1/|y - x| = sum_{n,m} R_n^m(x) S_n^m(y) for |x| < |y|.
 *
 * Both families satisfy C_n^{-m} = (-1)^m conj(C_n^m), so only m >= 0 is stored ("triangular"
 * layout, slot n(n+1)/2 + m). The real-packed layout used at API boundaries has p^2 slots,
 * slot n^2 + n + m holding Re C_n^m for m >= 0 and Im C_n^|m| for m < 0.
 */
#pragma once

#include "fmmds/morton.hpp"

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace fmmds
{

using Complex = std::complex<double>;

inline constexpr int kMaxOrder = 24;

inline constexpr std::size_t tri_index(int n, int m) { return std::size_t(n) * (n + 1) / 2 + m; }
inline constexpr std::size_t tri_size(int p) { return std::size_t(p) * (p + 1) / 2; }
inline constexpr std::size_t packed_index(int n, int m) { return std::size_t(n) * n + n + m; }

//! C_n^m for any m, from the triangular layout.
inline Complex tri_get(const Complex* t, int n, int m)
{
    if (m >= 0) return t[tri_index(n, m)];
    Complex c = std::conj(t[tri_index(n, -m)]);
    return (m & 1) ? -c : c;
}

//! n! for n <= 2 * (2 * kMaxOrder), as a double.
double factorial(int n);

//! Regular harmonics of degree < p, triangular layout (tri_size(p) values).
void regular_harmonics(int p, const Point3& x, Complex* out);

//! Irregular harmonics of degree < p, triangular layout. DomainError at the origin.
void irregular_harmonics(int p, const Point3& y, Complex* out);

//! Full m = -n..n layout (p^2 values, slot n^2 + n + m) from the triangular one.
void expand_full(int p, const Complex* tri, Complex* full);

void pack_real(int p, const Complex* tri, double* packed);
void unpack_real(int p, const double* packed, Complex* tri);

/*! @brief Real-packed regular basis at x
 *
 * Together with eval_S, sum_k eval_S(y)[k] * eval_R(x)[k] is the degree < p truncation of
 * 1/|y - x| whenever |x| < |y|.
 */
std::vector<double> eval_R(int p, const Point3& x);

/*! @brief Real-packed irregular basis at y, weighted for a plain dot product with eval_R
 *
 * Slots hold S_n^0, 2 Re S_n^m and -2 Im S_n^m, so the pairing over +-m folds into one term.
 * DomainError at |y| = 0.
 */
std::vector<double> eval_S(int p, const Point3& y);

} // namespace fmmds
