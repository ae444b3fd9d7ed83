#pragma once

// Forward-mode dual numbers. Nesting Dual<Dual<double>> gives hyper-dual
// numbers, which is how second (and third) directional derivatives are taken.

#include <cmath>
#include <concepts>
#include <type_traits>

#include <Eigen/Core>

namespace ousym {

template <class T>
struct Dual {
  T v{};  // value
  T d{};  // derivative (tangent) part

  constexpr Dual() = default;
  constexpr Dual(const T& value) : v(value), d(T(0)) {}
  constexpr Dual(const T& value, const T& tangent) : v(value), d(tangent) {}
  template <class U>
    requires(std::is_arithmetic_v<U> && !std::is_same_v<T, U>)
  constexpr Dual(U value) : v(T(value)), d(T(0)) {}

  Dual& operator+=(const Dual& o) { v += o.v; d += o.d; return *this; }
  Dual& operator-=(const Dual& o) { v -= o.v; d -= o.d; return *this; }
  Dual& operator*=(const Dual& o) { return *this = *this * o; }
  Dual& operator/=(const Dual& o) { return *this = *this / o; }

  friend constexpr Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
  friend constexpr Dual operator+(const Dual& a) { return a; }

  friend constexpr Dual operator+(const Dual& a, const Dual& b) { return {a.v + b.v, a.d + b.d}; }
  friend constexpr Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.d - b.d}; }
  friend constexpr Dual operator*(const Dual& a, const Dual& b) {
    return {a.v * b.v, a.d * b.v + a.v * b.d};
  }
  friend constexpr Dual operator/(const Dual& a, const Dual& b) {
    const T inv = T(1) / b.v;
    const T q = a.v * inv;
    return {q, (a.d - q * b.d) * inv};
  }

  template <class U>
    requires std::is_arithmetic_v<U>
  friend constexpr Dual operator+(const Dual& a, U b) { return {a.v + b, a.d}; }
  template <class U>
    requires std::is_arithmetic_v<U>
  friend constexpr Dual operator+(U a, const Dual& b) { return {a + b.v, b.d}; }
  template <class U>
    requires std::is_arithmetic_v<U>
  friend constexpr Dual operator-(const Dual& a, U b) { return {a.v - b, a.d}; }
  template <class U>
    requires std::is_arithmetic_v<U>
  friend constexpr Dual operator-(U a, const Dual& b) { return {a - b.v, -b.d}; }
  template <class U>
    requires std::is_arithmetic_v<U>
  friend constexpr Dual operator*(const Dual& a, U b) { return {a.v * b, a.d * b}; }
  template <class U>
    requires std::is_arithmetic_v<U>
  friend constexpr Dual operator*(U a, const Dual& b) { return {a * b.v, a * b.d}; }
  template <class U>
    requires std::is_arithmetic_v<U>
  friend constexpr Dual operator/(const Dual& a, U b) { return {a.v / b, a.d / b}; }
  template <class U>
    requires std::is_arithmetic_v<U>
  friend constexpr Dual operator/(U a, const Dual& b) { return Dual(T(a)) / b; }
};

using D1 = Dual<double>;
using D2 = Dual<D1>;
using D3 = Dual<D2>;

template <class T>
struct is_dual : std::false_type {};
template <class T>
struct is_dual<Dual<T>> : std::true_type {};

/// Nesting depth: 0 for double, 1 for Dual<double>, ...
template <class S>
inline constexpr int kDualLevel = 0;
template <class T>
inline constexpr int kDualLevel<Dual<T>> = 1 + kDualLevel<T>;

inline constexpr double primal(double x) { return x; }
template <class T>
constexpr double primal(const Dual<T>& x) { return primal(x.v); }

// Comparisons look only at the primal value.
template <class T>
constexpr bool operator<(const Dual<T>& a, const Dual<T>& b) { return primal(a) < primal(b); }
template <class T>
constexpr bool operator>(const Dual<T>& a, const Dual<T>& b) { return primal(a) > primal(b); }
template <class T>
constexpr bool operator<=(const Dual<T>& a, const Dual<T>& b) { return primal(a) <= primal(b); }
template <class T>
constexpr bool operator>=(const Dual<T>& a, const Dual<T>& b) { return primal(a) >= primal(b); }
template <class T>
constexpr bool operator==(const Dual<T>& a, const Dual<T>& b) { return a.v == b.v && a.d == b.d; }
template <class T>
constexpr bool operator!=(const Dual<T>& a, const Dual<T>& b) { return !(a == b); }

template <class T>
Dual<T> sin(const Dual<T>& x) {
  using std::cos;
  using std::sin;
  return {sin(x.v), x.d * cos(x.v)};
}
template <class T>
Dual<T> cos(const Dual<T>& x) {
  using std::cos;
  using std::sin;
  return {cos(x.v), -(x.d * sin(x.v))};
}
template <class T>
Dual<T> exp(const Dual<T>& x) {
  using std::exp;
  const T e = exp(x.v);
  return {e, x.d * e};
}
template <class T>
Dual<T> log(const Dual<T>& x) {
  using std::log;
  return {log(x.v), x.d / x.v};
}
template <class T>
Dual<T> sqrt(const Dual<T>& x) {
  using std::sqrt;
  const T s = sqrt(x.v);
  return {s, x.d / (2.0 * s)};
}
template <class T>
Dual<T> abs(const Dual<T>& x) {
  return primal(x) < 0.0 ? -x : x;
}
template <class T>
Dual<T> pow(const Dual<T>& x, double p) {
  using std::pow;
  if (p == 0.0) return Dual<T>(T(1.0));
  return {pow(x.v, p), x.d * (p * pow(x.v, p - 1.0))};
}
template <class T>
Dual<T> pow(const Dual<T>& x, const Dual<T>& y) {
  // Variable exponent, so x must be positive.
  return exp(y * log(x));
}

template <class T>
bool isfinite(const Dual<T>& x) {
  using std::isfinite;
  return isfinite(x.v) && isfinite(x.d);
}

/// Lift a value of level S to a dual with the given tangent.
template <class S>
Dual<S> make_dual(const S& value, const S& tangent) {
  return Dual<S>(value, tangent);
}

}  // namespace ousym

namespace Eigen {

template <class T>
struct NumTraits<ousym::Dual<T>> : NumTraits<double> {
  using Real = ousym::Dual<T>;
  using NonInteger = ousym::Dual<T>;
  using Nested = ousym::Dual<T>;
  using Literal = ousym::Dual<T>;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 2 * NumTraits<T>::ReadCost,
    AddCost = 2 * NumTraits<T>::AddCost,
    MulCost = 3 * NumTraits<T>::MulCost
  };
};

}  // namespace Eigen
