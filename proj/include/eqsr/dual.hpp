#pragma once

#include <array>
#include <cmath>

namespace eqsr {

/// Forward-mode dual number carrying N partial derivatives.
///
/// Chain-rule factors that are non-finite (1/sqrt(0), log of a negative
/// base in pow) only poison components whose incoming tangent is non-zero,
/// so a singular point in a branch that does not depend on a parameter
/// leaves that parameter's derivative intact.
template <int N>
struct Dual {
    double v{0.0};
    std::array<double, N> d{};

    Dual() = default;
    explicit Dual(double value) : v(value) {}

    static Dual variable(double value, int slot) {
        Dual r(value);
        r.d[static_cast<std::size_t>(slot)] = 1.0;
        return r;
    }
};

namespace dual_detail {

template <int N>
inline void scale_into(std::array<double, N>& out, const std::array<double, N>& in, double k) {
    if (std::isfinite(k)) {
        for (int j = 0; j < N; ++j) {
            out[j] = in[j] * k;
        }
    } else {
        for (int j = 0; j < N; ++j) {
            out[j] = in[j] == 0.0 ? 0.0 : in[j] * k;
        }
    }
}

template <int N>
inline void axpy_into(std::array<double, N>& out, const std::array<double, N>& in, double k) {
    if (std::isfinite(k)) {
        for (int j = 0; j < N; ++j) {
            out[j] += in[j] * k;
        }
    } else {
        for (int j = 0; j < N; ++j) {
            if (in[j] != 0.0) {
                out[j] += in[j] * k;
            }
        }
    }
}

template <int N>
inline Dual<N> chain(const Dual<N>& a, double value, double slope) {
    Dual<N> r(value);
    scale_into<N>(r.d, a.d, slope);
    return r;
}

} // namespace dual_detail

template <int N>
inline Dual<N> operator+(const Dual<N>& a, const Dual<N>& b) {
    Dual<N> r(a.v + b.v);
    for (int j = 0; j < N; ++j) {
        r.d[j] = a.d[j] + b.d[j];
    }
    return r;
}

template <int N>
inline Dual<N> operator-(const Dual<N>& a, const Dual<N>& b) {
    Dual<N> r(a.v - b.v);
    for (int j = 0; j < N; ++j) {
        r.d[j] = a.d[j] - b.d[j];
    }
    return r;
}

template <int N>
inline Dual<N> operator-(const Dual<N>& a) {
    Dual<N> r(-a.v);
    for (int j = 0; j < N; ++j) {
        r.d[j] = -a.d[j];
    }
    return r;
}

template <int N>
inline Dual<N> operator*(const Dual<N>& a, const Dual<N>& b) {
    Dual<N> r(a.v * b.v);
    for (int j = 0; j < N; ++j) {
        r.d[j] = a.d[j] * b.v + b.d[j] * a.v;
    }
    return r;
}

template <int N>
inline Dual<N> operator/(const Dual<N>& a, const Dual<N>& b) {
    const double inv = 1.0 / b.v;
    const double q = a.v * inv;
    Dual<N> r(q);
    for (int j = 0; j < N; ++j) {
        r.d[j] = (a.d[j] - q * b.d[j]) * inv;
    }
    return r;
}

template <int N>
inline Dual<N> pow(const Dual<N>& a, const Dual<N>& b) {
    const double value = std::pow(a.v, b.v);
    Dual<N> r(value);
    dual_detail::scale_into<N>(r.d, a.d, b.v * std::pow(a.v, b.v - 1.0));
    dual_detail::axpy_into<N>(r.d, b.d, value * std::log(a.v));
    return r;
}

template <int N>
inline Dual<N> sin(const Dual<N>& a) {
    return dual_detail::chain(a, std::sin(a.v), std::cos(a.v));
}

template <int N>
inline Dual<N> cos(const Dual<N>& a) {
    return dual_detail::chain(a, std::cos(a.v), -std::sin(a.v));
}

template <int N>
inline Dual<N> tan(const Dual<N>& a) {
    const double t = std::tan(a.v);
    return dual_detail::chain(a, t, 1.0 + t * t);
}

template <int N>
inline Dual<N> tanh(const Dual<N>& a) {
    const double t = std::tanh(a.v);
    return dual_detail::chain(a, t, 1.0 - t * t);
}

template <int N>
inline Dual<N> exp(const Dual<N>& a) {
    const double e = std::exp(a.v);
    return dual_detail::chain(a, e, e);
}

template <int N>
inline Dual<N> log(const Dual<N>& a) {
    return dual_detail::chain(a, std::log(a.v), 1.0 / a.v);
}

template <int N>
inline Dual<N> sqrt(const Dual<N>& a) {
    const double s = std::sqrt(a.v);
    return dual_detail::chain(a, s, 0.5 / s);
}

/// d|x|/dx = +1 at x = 0 (right branch).
template <int N>
inline Dual<N> abs(const Dual<N>& a) {
    return dual_detail::chain(a, std::fabs(a.v), a.v >= 0.0 ? 1.0 : -1.0);
}

/// Ties select the right operand, value and derivative.
template <int N>
inline Dual<N> min(const Dual<N>& a, const Dual<N>& b) {
    return a.v < b.v ? a : b;
}

template <int N>
inline Dual<N> max(const Dual<N>& a, const Dual<N>& b) {
    return a.v > b.v ? a : b;
}

} // namespace eqsr
