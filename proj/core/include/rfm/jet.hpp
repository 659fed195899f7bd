#pragma once

#include <cmath>

namespace rfm {

/// Second-order truncated Taylor number along one coordinate axis:
/// (f, df/dx, d2f/dx2). Mixed derivatives are never needed, so one pass per
/// axis suffices.
struct Jet2 {
  double value = 0.0;
  double first = 0.0;
  double second = 0.0;

  static constexpr Jet2 constant(double c) { return {c, 0.0, 0.0}; }
  /// The coordinate itself, scaled: d/dx (scale * x) = scale.
  static constexpr Jet2 variable(double x, double scale = 1.0) { return {x, scale, 0.0}; }

  constexpr Jet2& operator+=(const Jet2& o) {
    value += o.value;
    first += o.first;
    second += o.second;
    return *this;
  }
  constexpr Jet2& operator-=(const Jet2& o) {
    value -= o.value;
    first -= o.first;
    second -= o.second;
    return *this;
  }
  constexpr Jet2& operator*=(double s) {
    value *= s;
    first *= s;
    second *= s;
    return *this;
  }
};

constexpr Jet2 operator+(Jet2 a, const Jet2& b) { return a += b; }
constexpr Jet2 operator-(Jet2 a, const Jet2& b) { return a -= b; }
constexpr Jet2 operator-(const Jet2& a) { return {-a.value, -a.first, -a.second}; }
constexpr Jet2 operator*(Jet2 a, double s) { return a *= s; }
constexpr Jet2 operator*(double s, Jet2 a) { return a *= s; }
constexpr Jet2 operator+(Jet2 a, double s) {
  a.value += s;
  return a;
}
constexpr Jet2 operator+(double s, Jet2 a) { return a + s; }

constexpr Jet2 operator*(const Jet2& a, const Jet2& b) {
  return {a.value * b.value, a.first * b.value + a.value * b.first,
          a.second * b.value + 2.0 * a.first * b.first + a.value * b.second};
}

/// Chain rule for f(a) given f, f', f'' evaluated at a.value.
constexpr Jet2 compose(const Jet2& a, double f, double df, double d2f) {
  return {f, df * a.first, d2f * a.first * a.first + df * a.second};
}

inline Jet2 reciprocal(const Jet2& a) {
  const double inv = 1.0 / a.value;
  return compose(a, inv, -inv * inv, 2.0 * inv * inv * inv);
}

inline Jet2 operator/(const Jet2& a, const Jet2& b) { return a * reciprocal(b); }

inline Jet2 tanh(const Jet2& a) {
  const double t = std::tanh(a.value);
  const double d = 1.0 - t * t;
  return compose(a, t, d, -2.0 * t * d);
}

inline Jet2 sigmoid(const Jet2& a) {
  const double s = 1.0 / (1.0 + std::exp(-a.value));
  const double d = s * (1.0 - s);
  return compose(a, s, d, d * (1.0 - 2.0 * s));
}

inline Jet2 sin(const Jet2& a) {
  const double s = std::sin(a.value);
  const double c = std::cos(a.value);
  return compose(a, s, c, -s);
}

inline Jet2 cos(const Jet2& a) {
  const double s = std::sin(a.value);
  const double c = std::cos(a.value);
  return compose(a, c, -s, -c);
}

inline Jet2 exp(const Jet2& a) {
  const double e = std::exp(a.value);
  return compose(a, e, e, e);
}

}  // namespace rfm
