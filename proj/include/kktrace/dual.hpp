#pragma once

#include <array>
#include <cmath>
#include <type_traits>

namespace kktrace {

/// Forward-mode dual number with N partials over scalar T. Nesting
/// (Dual<N, Dual<N>>) yields exact Hessians; this is how the variational
/// equations get analytic derivatives of the Wong right-hand side without
/// finite differencing.
template <int N, typename T = double>
struct Dual {
  T v{};
  std::array<T, N> d{};

  Dual() = default;
  Dual(double value) : v(value) {}
  template <typename U,
            typename = std::enable_if_t<std::is_same_v<U, T> &&
                                        !std::is_same_v<U, double>>>
  Dual(const U& value) : v(value) {}

  static Dual seed(const T& value, int slot) {
    Dual r(value);
    r.d[slot] = T(1.0);
    return r;
  }

  Dual operator-() const {
    Dual r;
    r.v = -v;
    for (int i = 0; i < N; ++i) r.d[i] = -d[i];
    return r;
  }
  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (int i = 0; i < N; ++i) d[i] += o.d[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (int i = 0; i < N; ++i) d[i] -= o.d[i];
    return *this;
  }
};

template <int N, typename T>
Dual<N, T> operator+(Dual<N, T> a, const Dual<N, T>& b) { return a += b; }
template <int N, typename T>
Dual<N, T> operator-(Dual<N, T> a, const Dual<N, T>& b) { return a -= b; }

template <int N, typename T>
Dual<N, T> operator*(const Dual<N, T>& a, const Dual<N, T>& b) {
  Dual<N, T> r;
  r.v = a.v * b.v;
  for (int i = 0; i < N; ++i) r.d[i] = a.v * b.d[i] + b.v * a.d[i];
  return r;
}

template <int N, typename T>
Dual<N, T> operator/(const Dual<N, T>& a, const Dual<N, T>& b) {
  Dual<N, T> r;
  r.v = a.v / b.v;
  for (int i = 0; i < N; ++i) r.d[i] = (a.d[i] - r.v * b.d[i]) / b.v;
  return r;
}

template <int N, typename T> Dual<N, T> operator+(double a, Dual<N, T> b) { return Dual<N, T>(a) + b; }
template <int N, typename T> Dual<N, T> operator+(Dual<N, T> a, double b) { return a + Dual<N, T>(b); }
template <int N, typename T> Dual<N, T> operator-(double a, const Dual<N, T>& b) { return Dual<N, T>(a) - b; }
template <int N, typename T> Dual<N, T> operator-(Dual<N, T> a, double b) { return a - Dual<N, T>(b); }
template <int N, typename T> Dual<N, T> operator*(double a, const Dual<N, T>& b) { return Dual<N, T>(a) * b; }
template <int N, typename T> Dual<N, T> operator*(const Dual<N, T>& a, double b) { return a * Dual<N, T>(b); }
template <int N, typename T> Dual<N, T> operator/(double a, const Dual<N, T>& b) { return Dual<N, T>(a) / b; }
template <int N, typename T> Dual<N, T> operator/(const Dual<N, T>& a, double b) { return a / Dual<N, T>(b); }

using std::cos;
using std::exp;
using std::sin;
using std::sqrt;

template <int N, typename T>
Dual<N, T> sqrt(const Dual<N, T>& a) {
  Dual<N, T> r;
  r.v = sqrt(a.v);
  T half_inv = 0.5 / r.v;
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * half_inv;
  return r;
}

template <int N, typename T>
Dual<N, T> sin(const Dual<N, T>& a) {
  Dual<N, T> r;
  r.v = sin(a.v);
  T c = cos(a.v);
  for (int i = 0; i < N; ++i) r.d[i] = c * a.d[i];
  return r;
}

template <int N, typename T>
Dual<N, T> cos(const Dual<N, T>& a) {
  Dual<N, T> r;
  r.v = cos(a.v);
  T s = -sin(a.v);
  for (int i = 0; i < N; ++i) r.d[i] = s * a.d[i];
  return r;
}

template <int N, typename T>
Dual<N, T> exp(const Dual<N, T>& a) {
  Dual<N, T> r;
  r.v = exp(a.v);
  for (int i = 0; i < N; ++i) r.d[i] = r.v * a.d[i];
  return r;
}

inline double value_of(double x) { return x; }
template <int N, typename T>
double value_of(const Dual<N, T>& x) { return value_of(x.v); }

}  // namespace kktrace
