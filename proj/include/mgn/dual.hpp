#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace mgn::linalg {

/// Forward-mode dual number carrying `N` independent tangents.
///
/// Dual<1> is the single-tangent scalar (one pass per seeded direction);
/// wider instances propagate a chunk of directions through one evaluation.
/// Every operation applies the chain rule per tangent lane:
///   f(a + ε·da) = f(a) + ε·f'(a)·da.
template <std::size_t N>
struct Dual {
  double v = 0.0;
  std::array<double, N> d{};

  constexpr Dual() = default;
  constexpr Dual(double value) : v(value) {}  // NOLINT: implicit constants are the point

  static constexpr std::size_t lanes = N;

  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (std::size_t i = 0; i < N; ++i) d[i] += o.d[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (std::size_t i = 0; i < N; ++i) d[i] -= o.d[i];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    for (std::size_t i = 0; i < N; ++i) d[i] = d[i] * o.v + v * o.d[i];
    v *= o.v;
    return *this;
  }
};

using DualScalar = Dual<1>;

template <std::size_t N>
inline double value_of(const Dual<N>& x) {
  return x.v;
}

template <std::size_t N>
inline Dual<N> operator+(Dual<N> a, const Dual<N>& b) {
  a += b;
  return a;
}

template <std::size_t N>
inline Dual<N> operator-(Dual<N> a, const Dual<N>& b) {
  a -= b;
  return a;
}

template <std::size_t N>
inline Dual<N> operator-(const Dual<N>& a) {
  Dual<N> r;
  r.v = -a.v;
  for (std::size_t i = 0; i < N; ++i) r.d[i] = -a.d[i];
  return r;
}

template <std::size_t N>
inline Dual<N> operator*(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r;
  r.v = a.v * b.v;
  for (std::size_t i = 0; i < N; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
  return r;
}

template <std::size_t N>
inline Dual<N> operator/(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r;
  r.v = a.v / b.v;
  const double inv = 1.0 / b.v;
  for (std::size_t i = 0; i < N; ++i) r.d[i] = (a.d[i] - r.v * b.d[i]) * inv;
  return r;
}

// Mixed forms with plain doubles avoid materialising zero tangents.
template <std::size_t N>
inline Dual<N> operator*(double s, Dual<N> a) {
  a.v *= s;
  for (auto& t : a.d) t *= s;
  return a;
}
template <std::size_t N>
inline Dual<N> operator*(Dual<N> a, double s) {
  return s * a;
}
template <std::size_t N>
inline Dual<N> operator+(Dual<N> a, double s) {
  a.v += s;
  return a;
}
template <std::size_t N>
inline Dual<N> operator+(double s, Dual<N> a) {
  a.v += s;
  return a;
}
template <std::size_t N>
inline Dual<N> operator-(Dual<N> a, double s) {
  a.v -= s;
  return a;
}
template <std::size_t N>
inline Dual<N> operator-(double s, const Dual<N>& a) {
  return -a + s;
}
template <std::size_t N>
inline Dual<N> operator/(Dual<N> a, double s) {
  return (1.0 / s) * a;
}
template <std::size_t N>
inline Dual<N> operator/(double s, const Dual<N>& a) {
  return Dual<N>(s) / a;
}

namespace detail {
template <std::size_t N>
inline Dual<N> chain(const Dual<N>& a, double value, double slope) {
  Dual<N> r;
  r.v = value;
  for (std::size_t i = 0; i < N; ++i) r.d[i] = slope * a.d[i];
  return r;
}
}  // namespace detail

template <std::size_t N>
inline Dual<N> exp(const Dual<N>& a) {
  const double e = std::exp(a.v);
  return detail::chain(a, e, e);
}

template <std::size_t N>
inline Dual<N> log(const Dual<N>& a) {
  return detail::chain(a, std::log(a.v), 1.0 / a.v);
}

template <std::size_t N>
inline Dual<N> log1p(const Dual<N>& a) {
  return detail::chain(a, std::log1p(a.v), 1.0 / (1.0 + a.v));
}

template <std::size_t N>
inline Dual<N> sqrt(const Dual<N>& a) {
  const double s = std::sqrt(a.v);
  return detail::chain(a, s, 0.5 / s);
}

template <std::size_t N>
inline Dual<N> tanh(const Dual<N>& a) {
  const double t = std::tanh(a.v);
  return detail::chain(a, t, 1.0 - t * t);
}

/// Subgradient 0 at the kink.
template <std::size_t N>
inline Dual<N> abs(const Dual<N>& a) {
  const double s = a.v > 0.0 ? 1.0 : (a.v < 0.0 ? -1.0 : 0.0);
  return detail::chain(a, std::abs(a.v), s);
}

template <std::size_t N>
inline bool isfinite(const Dual<N>& a) {
  if (!std::isfinite(a.v)) return false;
  for (double t : a.d)
    if (!std::isfinite(t)) return false;
  return true;
}

}  // namespace mgn::linalg
