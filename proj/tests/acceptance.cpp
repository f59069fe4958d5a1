// Acceptance gate: one pass/fail line per shipped guarantee, with the
// tolerances pinned here. Exit status 0 only if every check passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "kamtori/homological.hpp"
#include "kamtori/kamflow.hpp"
#include "kamtori/model.hpp"
#include "kamtori/resonance.hpp"
#include "kamtori/sympmap.hpp"
#include "kamtori/verify.hpp"

using namespace kamtori;

namespace {

int failures = 0;

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

void report(int id, bool ok, double secs, double limit, const char* what) {
  const bool pass = ok && secs < limit;
  if (!pass) ++failures;
  std::printf("[%s] check %2d (%6.2f s / limit %g s): %s\n", pass ? "PASS" : "FAIL", id, secs,
              limit, what);
  std::fflush(stdout);
}

// Analytic Jacobian of one implicit midpoint step: the Cayley transform
// (I - (t/2) J H'')^{-1} (I + (t/2) J H'') at the midpoint, which is exactly
// symplectic whenever H'' is symmetric.
MatrixXd midpoint_jacobian(const SchemeModel& scheme, const PhasePoint& p, double t) {
  const int n = scheme.n(), m = scheme.m(), half = n + m, d = 2 * half;
  PhasePoint p1 = apply_scheme_step(scheme, p, t);
  const VectorXd zm = 0.5 * (p.packed() + p1.packed());
  PhasePoint pm = PhasePoint::unpack(zm, n, m);
  Jet2 jet = scheme.jet(pm.x, pm.u, pm.y, pm.v);
  MatrixXd jf(d, d);
  jf.topRows(half) = jet.hess.bottomRows(half);
  jf.bottomRows(half) = -jet.hess.topRows(half);
  const MatrixXd id = MatrixXd::Identity(d, d);
  return (id - 0.5 * t * jf).partialPivLu().solve(id + 0.5 * t * jf);
}

PhasePoint random_point(std::mt19937& rng, int n, int m) {
  std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI), amp(-0.05, 0.05),
      act(-0.02, 0.02);
  PhasePoint p;
  p.x = VectorXd::Zero(n).unaryExpr([&](double) { return ang(rng); });
  p.u = VectorXd::Zero(m).unaryExpr([&](double) { return amp(rng); });
  p.y = VectorXd::Zero(n).unaryExpr([&](double) { return act(rng); });
  p.v = VectorXd::Zero(m).unaryExpr([&](double) { return amp(rng); });
  return p;
}

void check_symplectic() {
  Timer tm;
  bool ok = true;
  std::mt19937 rng(1234);
  for (const char* name : {"twist-1-1", "twist-2-1"}) {
    ModelPreset preset = standard_test_model(name, 1e-3, 0.1);
    const int n = preset.ham.n(), m = preset.ham.m();
    for (int rep = 0; rep < 100; ++rep) {
      PhasePoint p = random_point(rng, n, m);
      const double dm = symplecticity_defect(twist_map_jacobian(preset.ham, p));
      const double ds = symplecticity_defect(midpoint_jacobian(preset.scheme, p, 0.1));
      ok = ok && dm <= 1e-9 && ds <= 1e-9;
    }
  }
  report(1, ok, tm.seconds(), 10.0,
         "map and midpoint-scheme Jacobians symplectic to 1e-9 at 100 random points");
}

void check_determinant() {
  Timer tm;
  bool ok = true;
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> th(-1.4, 1.4), ph(0.0, 2.0 * M_PI);
  for (int rep = 0; rep < 200; ++rep) {
    const double theta = th(rng), phi = ph(rng);
    const double a = 1.0 / std::cos(theta), b = std::tan(theta);
    const Complex e = std::polar(1.0, phi);
    Eigen::Matrix2cd M;
    M << a * e - 1.0, -b, b * e, e - a;
    const Complex expected = 2.0 * a * e * (std::cos(phi) - std::cos(theta));
    ok = ok && std::abs(M.determinant() - expected) <= 1e-12 * 2.0 * std::abs(a);
  }
  report(2, ok, tm.seconds(), 1.0,
         "normal-block determinant identity 2 sec(theta) e (cos phi - cos theta), rel 1e-12");
}

// Degree <= 2 monomial shapes for n = m = 1.
const std::vector<std::array<int, 3>> kLij = {
    {0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, 1, 1}, {0, 2, 0}, {0, 0, 2}};

Eigen::VectorXcd vectorize(const FourierField& f, int kmax) {
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero((2 * kmax + 1) * int(kLij.size()));
  for (int k = -kmax; k <= kmax; ++k)
    for (int c = 0; c < int(kLij.size()); ++c)
      v[(k + kmax) * int(kLij.size()) + c] =
          f.coeff(ModeKey{{k}, {kLij[c][0]}, {kLij[c][1]}, {kLij[c][2]}});
  return v;
}

FourierField mean_field(const NormalFormUpdate& means) {
  FourierField f(1, 1);
  f.add_term(ModeKey{{0}, {0}, {0}, {0}}, means.c000_mean);
  f.add_term(ModeKey{{0}, {1}, {0}, {0}}, means.t_omega_hat[0]);
  f.add_term(ModeKey{{0}, {0}, {1}, {1}}, means.a_hat[0]);
  f.add_term(ModeKey{{0}, {0}, {2}, {0}}, 0.5 * means.b_hat[0]);
  f.add_term(ModeKey{{0}, {0}, {0}, {2}}, 0.5 * means.c_hat[0]);
  return f;
}

void check_homological_oracle() {
  Timer tm;
  bool ok = true;
  const int kmax = 8, nc = int(kLij.size()), dim = (2 * kmax + 1) * nc;
  EllipticNormalData normal;
  normal.theta_t = VectorXd::Constant(1, 0.7);
  normal.t = 0.1;
  const VectorXd t_omega = VectorXd::Constant(1, 0.37);

  // Dense matrix of L from its action on unit coefficient fields.
  Eigen::MatrixXcd A(dim, dim);
  for (int k = -kmax; k <= kmax; ++k)
    for (int c = 0; c < nc; ++c) {
      FourierField e(1, 1);
      e.add_term(ModeKey{{k}, {kLij[c][0]}, {kLij[c][1]}, {kLij[c][2]}}, 1.0);
      A.col((k + kmax) * nc + c) = vectorize(apply_L(e, t_omega, normal), kmax);
    }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  std::vector<int> kernel;
  for (int i = 0; i < dim; ++i)
    if (svd.singularValues()[i] <= 1e-10 * svd.singularValues()[0]) kernel.push_back(i);

  std::mt19937 rng(4242);
  std::uniform_real_distribution<double> cd(-1.0, 1.0);
  for (int rep = 0; rep < 20 && ok; ++rep) {
    FourierField r(1, 1);
    for (int k = 0; k <= kmax; ++k)
      for (const auto& lij : kLij)
        r.set_real_mode(ModeKey{{k}, {lij[0]}, {lij[1]}, {lij[2]}}, Complex(cd(rng), cd(rng)));
    HomologicalSolution sol = solve_homological(r, t_omega, normal);
    const Eigen::VectorXcd fm = vectorize(sol.F, kmax);
    const Eigen::VectorXcd rhs = vectorize(r - mean_field(sol.means), kmax);
    // Forward re-application residual of the mode-wise solution.
    ok = ok && (A * fm - rhs).lpNorm<Eigen::Infinity>() <= 1e-11;
    // Dense solve, gauge-fixed to carry the same kernel components.
    Eigen::MatrixXcd B(dim + int(kernel.size()), dim);
    Eigen::VectorXcd b(dim + int(kernel.size()));
    B.topRows(dim) = A;
    b.head(dim) = rhs;
    for (int q = 0; q < int(kernel.size()); ++q) {
      const Eigen::VectorXcd dir = svd.matrixV().col(kernel[q]);
      B.row(dim + q) = dir.adjoint();
      b[dim + q] = dir.adjoint() * fm;
    }
    const Eigen::VectorXcd fd = B.colPivHouseholderQr().solve(b);
    ok = ok && (fd - fm).lpNorm<Eigen::Infinity>() <= 1e-10;
  }
  report(3, ok, tm.seconds(), 30.0,
         "mode-wise homological solve matches the dense operator oracle on 20 right sides");
}

KamState run_preset(double eps0, KamSchedule sched = {}) {
  ModelPreset preset = standard_test_model("twist-1-1", eps0, 0.1);
  return run_iteration(preset.ham, sched);
}

void check_contraction(const KamState& st) {
  Timer tm;
  bool ok = st.converged && int(st.trace.size()) >= 3;
  const double eps0 = ok ? st.trace[0].eps_v : 1.0;
  for (std::size_t i = 0; ok && i + 1 < st.trace.size(); ++i) {
    const double a = st.trace[i].eps_v / eps0, b = st.trace[i + 1].eps_v / eps0;
    ok = b <= std::pow(a, 1.25);
  }
  ok = ok && st.eps <= 1e-13;
  report(4, ok, tm.seconds(), 120.0,
         "iteration contracts with exponent >= 1.25 per step and reaches eps <= 1e-13");
}

void check_frequency_drift(const KamState& st_mid) {
  Timer tm;
  bool ok = true;
  ModelPreset base = standard_test_model("twist-1-1", 0.0, 0.1);
  const VectorXd omega0 = base.freq.omega(base.ham.xi_center);
  std::vector<double> ratio;
  for (double eps0 : {1e-7, 1e-6, 1e-5}) {
    KamState st = eps0 == 1e-6 ? st_mid : run_preset(eps0);
    ok = ok && st.converged;
    if (!st.converged) break;
    const VectorXd omega_inf = st.limit_t_omega() / st.ham.t;
    ratio.push_back((omega_inf - omega0).lpNorm<Eigen::Infinity>() / eps0);
  }
  if (ok) {
    const double lo = *std::min_element(ratio.begin(), ratio.end());
    const double hi = *std::max_element(ratio.begin(), ratio.end());
    ok = lo > 0.0 && hi / lo <= 3.0;
  }
  report(5, ok, tm.seconds(), 300.0,
         "limit-frequency drift scales linearly in eps0 over {1e-7, 1e-6, 1e-5} (factor 3)");
}

void check_invariance(const KamState& st) {
  Timer tm;
  ModelPreset preset = standard_test_model("twist-1-1", 1e-6, 0.1);
  const double res = invariance_residual(st, preset.ham, 64);
  VectorXd wrong = st.limit_t_omega();
  wrong[0] += 1e-3 * st.ham.t;
  const double res_wrong = invariance_residual(st, preset.ham, 64, wrong);
  report(6, res <= 1e-9 && res_wrong >= 1e-4, tm.seconds(), 60.0,
         "conjugated torus invariant to 1e-9; detuned-frequency control fails at 1e-4");
}

void check_measure_slope() {
  Timer tm;
  bool ok = true;
  ModelPreset preset = standard_test_model("twist-1-1", 1e-3, 0.1);
  std::vector<double> lg, lm;
  double prev = -1.0;
  for (int i = 0; i < 5; ++i) {
    MeasureParams p;
    p.gamma = 2e-3 * std::pow(10.0, i / 4.0);  // one decade
    p.grid_res = 2048;
    p.mc_samples = 0;
    MeasureEstimate est = excluded_measure(preset.freq, preset.scheme.B, p);
    ok = ok && est.measure_estimate > 0.0 && est.measure_estimate >= prev;
    prev = est.measure_estimate;
    lg.push_back(std::log(p.gamma));
    lm.push_back(std::log(std::max(est.measure_estimate, 1e-300)));
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lg.size(); ++i) {
    sx += lg[i];
    sy += lm[i];
    sxx += lg[i] * lg[i];
    sxy += lg[i] * lm[i];
  }
  const double nn = double(lg.size());
  const double slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
  ok = ok && slope >= 0.9 && slope <= 1.1;
  report(7, ok, tm.seconds(), 300.0,
         "excluded-measure gamma ladder monotone with log-log slope in [0.9, 1.1]");
}

void check_elliptic_bracketing(const KamState& st) {
  Timer tm;
  bool ok = !st.trace.empty();
  ModelPreset preset = standard_test_model("twist-1-1", 1e-6, 0.1);
  const double t = 0.1;
  for (const KamTraceEntry& e : st.trace)
    for (int j = 0; j < preset.scheme.B.size(); ++j) {
      const double b0t = std::abs(preset.scheme.B[j]) * t;
      const double bvt = std::abs(std::tan(e.theta[j]));
      ok = ok && 0.5 * b0t <= bvt && bvt <= 2.0 * b0t;
    }
  ModelPreset fine = standard_test_model("twist-1-1", 1e-6, 0.01);
  for (int j = 0; j < fine.scheme.B.size(); ++j)
    ok = ok && std::abs(fine.normal.theta_t[j]) <= 1.5 * std::abs(fine.scheme.B[j]) * 0.01;
  report(8, ok, tm.seconds(), 1.0,
         "elliptic angles stay bracketed by the initial normal frequencies");
}

void check_sublevel_bound() {
  Timer tm;
  bool ok = true;
  std::mt19937 rng(909);
  std::uniform_real_distribution<double> lead(0.5, 2.0), low(-1.0, 1.0), lh(-6.0, -3.0);
  std::uniform_int_distribution<int> deg(3, 4), sign(0, 1);
  for (int rep = 0; rep < 100 && ok; ++rep) {
    const int m = deg(rng);
    const double c = (sign(rng) ? 1.0 : -1.0) * lead(rng);
    std::vector<double> a(m);
    for (double& x : a) x = low(rng);
    auto g = [&](double x) {
      double v = c;
      for (int q = m; q >= 1; --q) v = v * x / q + a[q - 1];
      // Horner over c x^m / m! + sum a_{q-1} x^{q-1} / (q-1)!  -- the m-th
      // derivative is exactly c, so the certified floor is sharp.
      return v;
    };
    const double h = std::pow(10.0, lh(rng));
    try {
      sublevel_measure(g, -1.0, 1.0, h, m, 0.9 * std::abs(c));
    } catch (const std::exception&) {
      ok = false;
    }
  }
  report(9, ok, tm.seconds(), 30.0,
         "100 random cubic/quartic sublevel sets obey the 2 (m! h / d)^(1/m) bound");
}

void check_scheme_order_and_two_step() {
  Timer tm;
  bool ok = true;
  ModelPreset preset = standard_test_model("twist-1-1", 1e-3, 0.1);
  std::mt19937 rng(5150);
  PhasePoint z = random_point(rng, 1, 1);
  std::vector<double> lt, ld;
  for (double t : {0.2, 0.1, 0.05, 0.025}) {
    const VectorXd gap = apply_scheme_step(preset.scheme, z, t).packed() -
                         reference_flow(preset.scheme, z, t, 32).packed();
    lt.push_back(std::log(t));
    ld.push_back(std::log(gap.lpNorm<Eigen::Infinity>()));
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lt.size(); ++i) {
    sx += lt[i];
    sy += ld[i];
    sxx += lt[i] * lt[i];
    sxy += lt[i] * ld[i];
  }
  const double nn = double(lt.size());
  const double slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
  ok = ok && slope >= 2.8 && slope <= 3.2;

  ModelPreset sp = standard_test_model("twist-1-1", 1e-5, 0.1);
  KamSchedule sched;
  sched.nx = 32;
  TwoStepComparison cmp = scheme_two_step_compare(
      sp.scheme, sp.ham.xi_center, {0.1, 0.05, 0.025}, sched);
  for (double r : cmp.ratio) ok = ok && std::isfinite(r) && r <= 1e-6;
  report(10, ok, tm.seconds(), 300.0,
         "midpoint one-step defect has order-3 slope; two-step frequency ratios bounded");
}

}  // namespace

int main() {
  check_symplectic();
  check_determinant();
  check_homological_oracle();
  KamState st = run_preset(1e-6);
  check_contraction(st);
  check_frequency_drift(st);
  check_invariance(st);
  check_measure_slope();
  check_elliptic_bracketing(st);
  check_sublevel_bound();
  check_scheme_order_and_two_step();
  std::printf("%s: %d of 10 checks passed\n", failures == 0 ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL",
              10 - failures);
  return failures == 0 ? 0 : 1;
}
