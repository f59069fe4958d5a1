#include "kamtori/resonance.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "kamtori/util.hpp"

namespace kamtori {

namespace {

// All integer vectors with 0 < |k|_1 <= k_max.
std::vector<std::vector<int>> enumerate_k(int n, int k_max) {
  std::vector<std::vector<int>> out;
  std::vector<int> k(n, -k_max);
  while (true) {
    int norm = 0;
    for (int a : k) norm += std::abs(a);
    if (norm > 0 && norm <= k_max) out.push_back(k);
    int d = 0;
    while (d < n && k[d] == k_max) k[d++] = -k_max;
    if (d == n) break;
    ++k[d];
  }
  return out;
}

double dot_k(const std::vector<int>& k, const VectorXd& w) {
  double s = 0.0;
  for (size_t a = 0; a < k.size(); ++a) s += k[a] * w[a];
  return s;
}

int norm1(const std::vector<int>& k) {
  int s = 0;
  for (int a : k) s += std::abs(a);
  return s;
}

}  // namespace

double khat(const FrequencyMap& freq, double drift_c, double eps) {
  return freq.sup_omega + drift_c * eps + 1.0;
}

double khat_prime(const FrequencyMap& freq, const VectorXd& B, double drift_c, double eps) {
  double bmax = 0.0;
  for (int j = 0; j < B.size(); ++j) bmax = std::max(bmax, 3.0 * std::abs(B[j]));
  return khat(freq, drift_c, eps) + bmax;
}

ResonanceReport screen_small_divisors(const VectorXd& t_omega, const VectorXd& theta_t,
                                      const VectorXd& xi, const ScreenParams& p) {
  const int n = int(t_omega.size()), m = int(theta_t.size());
  ResonanceReport rep;
  rep.xi = xi;
  rep.min_margin = std::numeric_limits<double>::infinity();

  auto check = [&](const std::vector<int>& k, long l, int i, int j, int cond, double value,
                   double threshold) {
    const double margin = std::abs(value - two_pi * double(l)) - threshold;
    ++rep.margins_checked;
    rep.min_margin = std::min(rep.min_margin, margin);
    if (margin < 0.0) {
      rep.violations.push_back({k, l, i, j, cond, margin});
      rep.passed = false;
    }
  };

  // k = 0: the pure condition is trivial and the elliptic ones reduce to
  // |theta| >= t gamma_v (and likewise for sums and differences).
  const std::vector<int> kzero(n, 0);
  const double thr0 = p.t * p.gamma_v;
  for (int j = 0; j < m; ++j) check(kzero, 0, -1, j, 2, theta_t[j], thr0);
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) check(kzero, 0, i, j, 3, theta_t[i] + theta_t[j], thr0);
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) check(kzero, 0, i, j, 4, theta_t[i] - theta_t[j], thr0);

  for (const auto& k : enumerate_k(n, p.k_max)) {
    const double kw = dot_k(k, t_omega);
    const int kn = norm1(k);
    const double threshold = p.t * p.gamma_v * std::pow(double(kn), -p.tau);
    const long lmax1 = long(std::ceil(kn * p.K_hat));
    const long lmax2 = long(std::ceil(kn * p.K_hat_prime));
    for (long l = -lmax1; l <= lmax1; ++l) check(k, l, -1, -1, 1, kw, threshold);
    for (long l = -lmax2; l <= lmax2; ++l) {
      for (int j = 0; j < m; ++j) check(k, l, -1, j, 2, kw - theta_t[j], threshold);
      for (int i = 0; i < m; ++i)
        for (int j = i; j < m; ++j) check(k, l, i, j, 3, kw - theta_t[i] - theta_t[j], threshold);
      for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j)
          check(k, l, i, j, 4, kw - theta_t[i] + theta_t[j], threshold);
    }
  }
  return rep;
}

namespace {

// Directional derivative of f of the given order along coordinate axis d at
// xi, central differences with one Richardson extrapolation.
double directional_derivative(const std::function<double(const VectorXd&)>& f, const VectorXd& xi,
                              int d, int order, double h) {
  auto stencil = [&](double hh) {
    auto at = [&](double s) {
      VectorXd x = xi;
      x[d] += s;
      return f(x);
    };
    switch (order) {
      case 0:
        return f(xi);
      case 1:
        return (at(hh) - at(-hh)) / (2.0 * hh);
      case 2:
        return (at(hh) - 2.0 * f(xi) + at(-hh)) / (hh * hh);
      case 3:
        return (at(2 * hh) - 2.0 * at(hh) + 2.0 * at(-hh) - at(-2 * hh)) / (2.0 * hh * hh * hh);
      default:
        return (at(2 * hh) - 4.0 * at(hh) + 6.0 * f(xi) - 4.0 * at(-hh) + at(-2 * hh)) /
               (hh * hh * hh * hh);
    }
  };
  if (order == 0) return stencil(h);
  return (4.0 * stencil(h / 2.0) - stencil(h)) / 3.0;
}

}  // namespace

RuessmannData russmann_index_amount(const FrequencyMap& freq, int nbar_max, std::uint64_t seed) {
  const int n = freq.n;
  RuessmannData out;

  // Probe directions: coordinate vectors plus random integer vectors.
  out.probes.clear();
  for (int d = 0; d < n; ++d) {
    std::vector<int> k(n, 0);
    k[d] = 1;
    out.probes.push_back(k);
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> ki(-20, 20);
  while (out.probes.size() < size_t(n + 20)) {
    std::vector<int> k(n);
    for (int d = 0; d < n; ++d) k[d] = ki(rng);
    if (norm1(k) > 0) out.probes.push_back(k);
  }

  const int res = 201;
  std::vector<VectorXd> grid;
  std::vector<int> idx(n, 0);
  while (true) {
    VectorXd xi(n);
    for (int d = 0; d < n; ++d)
      xi[d] = freq.domain.lo[d] + (freq.domain.hi[d] - freq.domain.lo[d]) * idx[d] / (res - 1);
    grid.push_back(xi);
    int d = 0;
    while (d < n && idx[d] == res - 1) idx[d++] = 0;
    if (d == n) break;
    ++idx[d];
  }
  out.grid = grid;

  const double floor = 1e-3;
  const double h = 1e-4;
  for (int nbar = 1; nbar <= nbar_max; ++nbar) {
    bool ok = true;
    VectorXd worst_xi = grid.front();

    // Rank condition on the derivative vectors of omega of orders 1..nbar,
    // axis directions: the n-th singular value must clear the floor.
    for (const auto& xi : grid) {
      MatrixXd cols(n, n * nbar);
      for (int v = 1; v <= nbar; ++v)
        for (int d = 0; d < n; ++d)
          for (int c = 0; c < n; ++c) {
            auto fc = [&](const VectorXd& x) { return freq.omega(x)[c]; };
            cols(c, (v - 1) * n + d) = directional_derivative(fc, xi, d, v, h);
          }
      Eigen::JacobiSVD<MatrixXd> svd(cols);
      if (svd.singularValues()[n - 1] < floor) {
        ok = false;
        worst_xi = xi;
        break;
      }
    }

    if (ok) {
      // Certified amount over the probe set, derivative orders 0..nbar.
      double beta = std::numeric_limits<double>::infinity();
      for (const auto& k : out.probes) {
        auto f = [&](const VectorXd& xi) { return dot_k(k, freq.omega(xi)); };
        const double kn = norm1(k);
        for (const auto& xi : grid) {
          double best = 0.0;
          for (int v = 0; v <= nbar; ++v)
            for (int d = 0; d < n; ++d)
              best = std::max(best, std::abs(directional_derivative(f, xi, d, v, h)));
          beta = std::min(beta, best / kn);
        }
      }
      out.nbar = nbar;
      out.beta_amount = 0.9 * beta;
      return out;
    }
    if (nbar == nbar_max) {
      std::string msg = "russmann_index_amount: rank condition unmet at nbar_max=" +
                        std::to_string(nbar_max) + ", worst xi = (";
      for (int d = 0; d < n; ++d) msg += (d ? ", " : "") + std::to_string(worst_xi[d]);
      throw RankFailure(msg + ")");
    }
  }
  throw RankFailure("russmann_index_amount: nbar_max < 1");
}

namespace {

bool cell_excluded(const FrequencyMap& freq, const VectorXd& B, const MeasureParams& p,
                   const VectorXd& xi, int* first_condition) {
  VectorXd t_omega = p.t * freq.omega(xi);
  VectorXd theta(B.size());
  for (int j = 0; j < B.size(); ++j) theta[j] = std::atan(B[j] * p.t);
  ScreenParams sp;
  sp.tau = p.tau;
  sp.t = p.t;
  sp.k_max = p.k_max;
  sp.K_hat = khat(freq, 1.0, 0.0);
  sp.K_hat_prime = khat_prime(freq, B, 1.0, 0.0);
  for (int v = 0; v <= p.v_max; ++v) {
    sp.gamma_v = p.gamma / std::pow(2.0, v);
    ResonanceReport rep = screen_small_divisors(t_omega, theta, xi, sp);
    if (!rep.passed) {
      if (first_condition) *first_condition = rep.violations.front().condition;
      return true;
    }
  }
  return false;
}

}  // namespace

MeasureEstimate excluded_measure(const FrequencyMap& freq, const VectorXd& B,
                                 const MeasureParams& p) {
  const int n = freq.n;
  MeasureEstimate out;
  out.volume = freq.domain.volume();

  long cells = 1;
  for (int d = 0; d < n; ++d) cells *= p.grid_res;
  out.cells = cells;

  std::vector<long> by_cond(4, 0);
  long excluded = 0;
#pragma omp parallel for schedule(static) reduction(+ : excluded) if (p.parallel)
  for (long c = 0; c < cells; ++c) {
    VectorXd xi(n);
    long rem = c;
    for (int d = 0; d < n; ++d) {
      xi[d] = freq.domain.lo[d] +
              (freq.domain.hi[d] - freq.domain.lo[d]) * (rem % p.grid_res + 0.5) / p.grid_res;
      rem /= p.grid_res;
    }
    int cond = 0;
    if (cell_excluded(freq, B, p, xi, &cond)) {
      ++excluded;
#pragma omp critical
      ++by_cond[cond - 1];
    }
  }
  out.excluded_cells = excluded;
  out.fraction = double(excluded) / double(cells);
  out.measure_estimate = out.fraction * out.volume;
  for (int c = 0; c < 4; ++c) out.by_condition[c] = by_cond[c];

  // Monte-Carlo cross-check.
  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  long hits = 0;
  for (long s = 0; s < p.mc_samples; ++s) {
    VectorXd xi(n);
    for (int d = 0; d < n; ++d)
      xi[d] = freq.domain.lo[d] + (freq.domain.hi[d] - freq.domain.lo[d]) * unif(rng);
    if (cell_excluded(freq, B, p, xi, nullptr)) ++hits;
  }
  out.mc_samples = p.mc_samples;
  out.mc_fraction = double(hits) / double(p.mc_samples);
  WilsonInterval ci = wilson_interval(hits, p.mc_samples);
  out.ci_low = ci.low;
  out.ci_high = ci.high;
  return out;
}

double sublevel_measure(const std::function<double(double)>& g, double a, double b, double h,
                        int m_order, double d_floor) {
  if (m_order < 1 || m_order > 4)
    throw std::invalid_argument("sublevel_measure: m_order out of range");
  if (!(b > a)) throw std::invalid_argument("sublevel_measure: empty interval");

  // Certify the derivative floor on a fine grid. The step balances the
  // O(h^4) extrapolation error against the O(eps / h^m) roundoff of an
  // order-m central difference; a fixed small step would be pure noise at
  // m = 4.
  const int certify = 2001;
  const double hd =
      (b - a) * std::pow(std::numeric_limits<double>::epsilon(), 1.0 / (m_order + 4));
  auto gv = [&](const VectorXd& x) { return g(x[0]); };
  for (int i = 0; i < certify; ++i) {
    VectorXd x = VectorXd::Constant(1, a + (b - a) * i / (certify - 1));
    const double dm = directional_derivative(gv, x, 0, m_order, hd);
    if (std::abs(dm) < d_floor * (1.0 - 1e-6))
      throw std::runtime_error("sublevel_measure: derivative floor violated at x=" +
                               std::to_string(x[0]));
  }

  // Locate all crossings of g = h and g = -h by scan plus bisection.
  const int scan = 1 << 14;
  std::vector<double> cuts{a, b};
  for (double level : {h, -h}) {
    double x0 = a, f0 = g(a) - level;
    for (int i = 1; i <= scan; ++i) {
      const double x1 = a + (b - a) * i / scan;
      const double f1 = g(x1) - level;
      if ((f0 < 0.0) != (f1 < 0.0)) {
        double lo = x0, hi = x1;
        for (int it = 0; it < 80; ++it) {
          const double mid = 0.5 * (lo + hi);
          if (((g(mid) - level) < 0.0) == (f0 < 0.0))
            lo = mid;
          else
            hi = mid;
          if (hi - lo < 1e-14 * (b - a)) break;
        }
        cuts.push_back(0.5 * (lo + hi));
      }
      x0 = x1;
      f0 = f1;
    }
  }
  std::sort(cuts.begin(), cuts.end());

  double measure = 0.0;
  for (size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
    if (std::abs(g(mid)) < h) measure += cuts[i + 1] - cuts[i];
  }

  double mfact = 1.0;
  for (int v = 2; v <= m_order; ++v) mfact *= v;
  const double bound = 2.0 * std::pow(mfact * h / d_floor, 1.0 / m_order);
  if (measure > bound + 1e-8)
    throw std::runtime_error("sublevel_measure: analytic bound violated (" +
                             std::to_string(measure) + " > " + std::to_string(bound) + ")");
  return measure;
}

double lemma52_matrix_screen(const FrequencyMap& freq, const std::vector<int>& k, double theta,
                             const std::function<double(const VectorXd&)>& P_t, double alpha,
                             double tau, double t, int grid_res) {
  const int n = freq.n;
  long cells = 1;
  for (int d = 0; d < n; ++d) cells *= grid_res;
  if (cells < 1000) throw std::invalid_argument("lemma52_matrix_screen: grid too coarse");

  const double kn = double(norm1(k));
  const double cutoff = t * alpha * std::pow(kn, -tau);
  long bad = 0;
#pragma omp parallel for schedule(static) reduction(+ : bad)
  for (long c = 0; c < cells; ++c) {
    VectorXd xi(n);
    long rem = c;
    for (int d = 0; d < n; ++d) {
      xi[d] = freq.domain.lo[d] +
              (freq.domain.hi[d] - freq.domain.lo[d]) * (rem % grid_res + 0.5) / grid_res;
      rem /= grid_res;
    }
    double kw = 0.0;
    VectorXd w = t * freq.omega(xi);
    for (int d = 0; d < n; ++d) kw += k[d] * w[d];
    const double M = kw - theta + (P_t ? P_t(xi) : 0.0);
    if (std::abs(M) < cutoff) ++bad;
  }
  return double(bad) / double(cells);
}

}  // namespace kamtori
