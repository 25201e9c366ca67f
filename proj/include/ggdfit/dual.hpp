#pragma once

#include <cmath>

#include "ggdfit/special.hpp"

namespace ggdfit {

// Forward-mode scalar with first derivative. Used to differentiate
// fixed-effect objectives one parameter at a time.
struct Dual {
  double v = 0.0;
  double d = 0.0;

  Dual() = default;
  Dual(double value) : v(value), d(0.0) {}
  Dual(double value, double deriv) : v(value), d(deriv) {}
};

inline Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
inline Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
inline Dual operator-(Dual a) { return {-a.v, -a.d}; }
inline Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
inline Dual operator/(Dual a, Dual b) {
  const double inv = 1.0 / b.v;
  return {a.v * inv, (a.d - a.v * b.d * inv) * inv};
}
inline Dual& operator+=(Dual& a, Dual b) { a = a + b; return a; }
inline Dual& operator-=(Dual& a, Dual b) { a = a - b; return a; }
inline Dual& operator*=(Dual& a, Dual b) { a = a * b; return a; }
inline Dual& operator/=(Dual& a, Dual b) { a = a / b; return a; }

inline bool operator<(Dual a, Dual b) { return a.v < b.v; }
inline bool operator>(Dual a, Dual b) { return a.v > b.v; }
inline bool operator<=(Dual a, Dual b) { return a.v <= b.v; }
inline bool operator>=(Dual a, Dual b) { return a.v >= b.v; }

inline Dual exp(Dual a) { const double e = std::exp(a.v); return {e, e * a.d}; }
inline Dual log(Dual a) { return {std::log(a.v), a.d / a.v}; }
inline Dual sqrt(Dual a) { const double s = std::sqrt(a.v); return {s, 0.5 * a.d / s}; }
inline Dual log1p(Dual a) { return {std::log1p(a.v), a.d / (1.0 + a.v)}; }
inline Dual expm1(Dual a) { return {std::expm1(a.v), std::exp(a.v) * a.d}; }
inline Dual fabs(Dual a) { return a.v < 0.0 ? Dual{-a.v, -a.d} : a; }
inline Dual lgamma(Dual a) { return {std::lgamma(a.v), digamma_(a.v) * a.d}; }
inline Dual pow(Dual a, double b) {
  const double p = std::pow(a.v, b);
  return {p, b * std::pow(a.v, b - 1.0) * a.d};
}

inline double value_of(double x) { return x; }
inline double value_of(Dual x) { return x.v; }

// Forward-mode scalar carrying first and second derivatives with respect
// to a single variable. Used for the inner Newton step in the Laplace
// approximation, where each observation depends on one latent value.
struct Dual2 {
  double v = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;

  Dual2() = default;
  Dual2(double value) : v(value), d1(0.0), d2(0.0) {}
  Dual2(double value, double first, double second = 0.0) : v(value), d1(first), d2(second) {}
};

inline Dual2 operator+(Dual2 a, Dual2 b) { return {a.v + b.v, a.d1 + b.d1, a.d2 + b.d2}; }
inline Dual2 operator-(Dual2 a, Dual2 b) { return {a.v - b.v, a.d1 - b.d1, a.d2 - b.d2}; }
inline Dual2 operator-(Dual2 a) { return {-a.v, -a.d1, -a.d2}; }
inline Dual2 operator*(Dual2 a, Dual2 b) {
  return {a.v * b.v, a.d1 * b.v + a.v * b.d1, a.d2 * b.v + 2.0 * a.d1 * b.d1 + a.v * b.d2};
}
inline Dual2 operator/(Dual2 a, Dual2 b) {
  const double inv = 1.0 / b.v;
  const double q = a.v * inv;
  const double q1 = (a.d1 - q * b.d1) * inv;
  const double q2 = (a.d2 - 2.0 * q1 * b.d1 - q * b.d2) * inv;
  return {q, q1, q2};
}
inline Dual2& operator+=(Dual2& a, Dual2 b) { a = a + b; return a; }
inline Dual2& operator-=(Dual2& a, Dual2 b) { a = a - b; return a; }
inline Dual2& operator*=(Dual2& a, Dual2 b) { a = a * b; return a; }

inline bool operator<(Dual2 a, Dual2 b) { return a.v < b.v; }
inline bool operator>(Dual2 a, Dual2 b) { return a.v > b.v; }

// Chain rule for f(g): f'(g)g', f''(g)g'^2 + f'(g)g''.
inline Dual2 chain(double f, double fp, double fpp, Dual2 g) {
  return {f, fp * g.d1, fpp * g.d1 * g.d1 + fp * g.d2};
}

inline Dual2 exp(Dual2 a) { const double e = std::exp(a.v); return chain(e, e, e, a); }
inline Dual2 log(Dual2 a) {
  const double inv = 1.0 / a.v;
  return chain(std::log(a.v), inv, -inv * inv, a);
}
inline Dual2 log1p(Dual2 a) {
  const double inv = 1.0 / (1.0 + a.v);
  return chain(std::log1p(a.v), inv, -inv * inv, a);
}
inline Dual2 lgamma(Dual2 a) {
  return chain(std::lgamma(a.v), digamma_(a.v), trigamma_(a.v), a);
}
inline Dual2 pow(Dual2 a, double b) {
  const double p = std::pow(a.v, b);
  return chain(p, b * std::pow(a.v, b - 1.0), b * (b - 1.0) * std::pow(a.v, b - 2.0), a);
}
inline Dual2 sqrt(Dual2 a) { return pow(a, 0.5); }
inline Dual2 fabs(Dual2 a) { return a.v < 0.0 ? -a : a; }

inline double value_of(Dual2 x) { return x.v; }

}  // namespace ggdfit
