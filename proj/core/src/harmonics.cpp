#include "fmmds/harmonics.hpp"

#include "fmmds/errors.hpp"

#include <array>
#include <cmath>
#include <string>

namespace fmmds
{

namespace
{

constexpr int kMaxFactorial = 4 * kMaxOrder;

const std::array<double, kMaxFactorial + 1>& factorial_table()
{
    static const auto table = [] {
        std::array<double, kMaxFactorial + 1> t{};
        t[0] = 1;
        for (int i = 1; i <= kMaxFactorial; ++i)
        {
            t[i] = t[i - 1] * i;
        }
        return t;
    }();
    return table;
}

void check_order(int p)
{
    // irregular tables for M2L run to degree 2p - 2, so allow up to 2 * kMaxOrder here
    if (p < 1 || p > 2 * kMaxOrder) { throw DomainError("expansion order " + std::to_string(p) + " out of range"); }
}

} // namespace

double factorial(int n)
{
    if (n < 0 || n > kMaxFactorial) { throw DomainError("factorial argument out of range"); }
    return factorial_table()[n];
}

void regular_harmonics(int p, const Point3& x, Complex* out)
{
    check_order(p);
    const Complex w(x.x, x.y);
    const Complex half_w  = 0.5 * w;
    const Complex half_wc = 0.5 * std::conj(w);
    const double  z       = x.z;

    out[0] = 1.0;
    for (int n = 0; n + 1 < p; ++n)
    {
        const Complex* cur = out + tri_index(n, 0);
        Complex*       nxt = out + tri_index(n + 1, 0);
        const double   inv = 1.0 / (n + 1);
        auto           at  = [&](int m) -> Complex {
            if (m > n || -m > n) return 0.0;
            if (m >= 0) return cur[m];
            Complex c = std::conj(cur[-m]);
            return (m & 1) ? -c : c;
        };
        for (int m = 0; m <= n + 1; ++m)
        {
            nxt[m] = (z * at(m) + half_w * at(m - 1) - half_wc * at(m + 1)) * inv;
        }
        nxt[0] = nxt[0].real();
    }
}

void irregular_harmonics(int p, const Point3& y, Complex* out)
{
    double r2 = y.x * y.x + y.y * y.y + y.z * y.z;
    if (!(r2 > 0)) { throw DomainError("irregular harmonics evaluated at zero radius"); }
    regular_harmonics(p, y, out);
    const auto&  fact = factorial_table();
    const double inv  = 1.0 / r2;
    double       rpow = 1.0 / std::sqrt(r2); // 1 / r^(2n+1)
    for (int n = 0; n < p; ++n)
    {
        for (int m = 0; m <= n; ++m)
        {
            Complex& c = out[tri_index(n, m)];
            c          = std::conj(c) * (fact[n - m] * fact[n + m] * rpow);
        }
        rpow *= inv;
    }
}

void expand_full(int p, const Complex* tri, Complex* full)
{
    for (int n = 0; n < p; ++n)
    {
        for (int m = -n; m <= n; ++m)
        {
            full[packed_index(n, m)] = tri_get(tri, n, m);
        }
    }
}

void pack_real(int p, const Complex* tri, double* packed)
{
    for (int n = 0; n < p; ++n)
    {
        packed[packed_index(n, 0)] = tri[tri_index(n, 0)].real();
        for (int m = 1; m <= n; ++m)
        {
            packed[packed_index(n, m)]  = tri[tri_index(n, m)].real();
            packed[packed_index(n, -m)] = tri[tri_index(n, m)].imag();
        }
    }
}

void unpack_real(int p, const double* packed, Complex* tri)
{
    for (int n = 0; n < p; ++n)
    {
        tri[tri_index(n, 0)] = packed[packed_index(n, 0)];
        for (int m = 1; m <= n; ++m)
        {
            tri[tri_index(n, m)] = Complex(packed[packed_index(n, m)], packed[packed_index(n, -m)]);
        }
    }
}

std::vector<double> eval_R(int p, const Point3& x)
{
    std::vector<Complex> tri(tri_size(p));
    regular_harmonics(p, x, tri.data());
    std::vector<double> out(std::size_t(p) * p);
    pack_real(p, tri.data(), out.data());
    return out;
}

std::vector<double> eval_S(int p, const Point3& y)
{
    std::vector<Complex> tri(tri_size(p));
    irregular_harmonics(p, y, tri.data());
    std::vector<double> out(std::size_t(p) * p);
    for (int n = 0; n < p; ++n)
    {
        out[packed_index(n, 0)] = tri[tri_index(n, 0)].real();
        for (int m = 1; m <= n; ++m)
        {
            out[packed_index(n, m)]  = 2 * tri[tri_index(n, m)].real();
            out[packed_index(n, -m)] = -2 * tri[tri_index(n, m)].imag();
        }
    }
    return out;
}

} // namespace fmmds
