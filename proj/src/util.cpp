#include "kamtori/util.hpp"

#include <cstdio>

namespace kamtori {

const std::array<double, 8>& GaussLegendre8::nodes() {
  // Abscissae on [0,1].
  static const std::array<double, 8> n = {
      0.01985507175123188415821957, 0.10166676129318663020422303,
      0.23723379504183550709113047, 0.40828267875217509753026193,
      0.59171732124782490246973807, 0.76276620495816449290886953,
      0.89833323870681336979577697, 0.98014492824876811584178043};
  return n;
}

const std::array<double, 8>& GaussLegendre8::weights() {
  static const std::array<double, 8> w = {
      0.05061426814518812957626567, 0.11119051722668723527217800,
      0.15685332293894364366898110, 0.18134189168918099148257522,
      0.18134189168918099148257522, 0.15685332293894364366898110,
      0.11119051722668723527217800, 0.05061426814518812957626567};
  return w;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  return (n * sxy - sx * sy) / denom;
}

WilsonInterval wilson_interval(long successes, long trials, double z) {
  WilsonInterval w;
  if (trials <= 0) return w;
  const double p = double(successes) / double(trials);
  const double z2 = z * z;
  const double denom = 1.0 + z2 / trials;
  const double center = p + z2 / (2.0 * trials);
  const double margin = z * std::sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials));
  w.low = (center - margin) / denom;
  w.high = (center + margin) / denom;
  if (w.low < 0) w.low = 0;
  if (w.high > 1) w.high = 1;
  return w;
}

}  // namespace kamtori
