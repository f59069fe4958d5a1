#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

namespace kamtori {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

// Reduce an angle into [0, 2*pi).
inline double wrap_angle(double x) {
  double r = std::fmod(x, two_pi);
  if (r < 0.0) r += two_pi;
  return r;
}

// Signed distance from x to the nearest point of 2*pi*Z.
inline double dist_to_2pi_lattice(double x) {
  double r = std::remainder(x, two_pi);
  return std::abs(r);
}

// 8-node Gauss-Legendre rule on [0,1].
struct GaussLegendre8 {
  static const std::array<double, 8>& nodes();
  static const std::array<double, 8>& weights();
};

// FNV-1a 64-bit hash, used for content-addressed run directories.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v);

// Least-squares slope of y against x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);

// Wilson score interval for a binomial proportion.
struct WilsonInterval {
  double low = 0.0;
  double high = 0.0;
};
WilsonInterval wilson_interval(long successes, long trials, double z = 1.959963984540054);

}  // namespace kamtori
