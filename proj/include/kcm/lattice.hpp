#pragma once

#include <compare>
#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

namespace kcm {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Site of Z^d (d = 1 or 2) or a displacement between sites. In dimension 1
/// the second coordinate is always zero.
struct Vec {
  std::int64_t x = 0;
  std::int64_t y = 0;

  constexpr auto operator<=>(const Vec&) const = default;

  constexpr Vec& operator+=(Vec o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec& operator-=(Vec o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
};

constexpr Vec operator+(Vec a, Vec b) { return a += b; }
constexpr Vec operator-(Vec a, Vec b) { return a -= b; }
constexpr Vec operator-(Vec a) { return {-a.x, -a.y}; }
constexpr Vec operator*(std::int64_t k, Vec a) { return {k * a.x, k * a.y}; }

constexpr std::int64_t dot(Vec a, Vec b) { return a.x * b.x + a.y * b.y; }
constexpr std::int64_t cross(Vec a, Vec b) { return a.x * b.y - a.y * b.x; }

constexpr std::int64_t linf(Vec a) {
  const std::int64_t ax = a.x < 0 ? -a.x : a.x;
  const std::int64_t ay = a.y < 0 ? -a.y : a.y;
  return ax > ay ? ax : ay;
}

constexpr bool is_zero(Vec a) { return a.x == 0 && a.y == 0; }

// Quarter turns.
constexpr Vec rot_ccw(Vec a) { return {-a.y, a.x}; }
constexpr Vec rot_cw(Vec a) { return {a.y, -a.x}; }

/// Divides out the gcd of the coordinates. The zero vector is returned as is.
inline Vec reduced(Vec a) {
  const std::int64_t g = std::gcd(a.x, a.y);
  if (g == 0) return a;
  return {a.x / g, a.y / g};
}

inline std::string to_string(Vec v) {
  return "(" + std::to_string(v.x) + "," + std::to_string(v.y) + ")";
}

inline std::ostream& operator<<(std::ostream& os, Vec v) { return os << to_string(v); }

}  // namespace kcm
