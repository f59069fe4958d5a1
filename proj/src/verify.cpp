#include "kamtori/verify.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "kamtori/resonance.hpp"
#include "kamtori/util.hpp"

namespace kamtori {

RotationEstimate rotation_vector(const std::vector<VectorXd>& lifted_angles) {
  const long N = long(lifted_angles.size()) - 1;
  if (N + 1 < 1000) throw std::invalid_argument("rotation_vector: orbit too short");
  const int n = int(lifted_angles.front().size());

  auto weighted = [&](long begin, long count) {
    VectorXd acc = VectorXd::Zero(n);
    double wsum = 0.0;
    for (long i = 0; i < count; ++i) {
      const double s = double(i + 1) / double(count + 1);
      const double w = std::exp(-1.0 / (s * (1.0 - s)));
      VectorXd d = lifted_angles[begin + i + 1] - lifted_angles[begin + i];
      if (!d.allFinite()) throw std::invalid_argument("rotation_vector: non-finite input");
      acc += w * d;
      wsum += w;
    }
    return VectorXd((acc / wsum).eval());
  };

  RotationEstimate out;
  out.rotation = weighted(0, N);
  VectorXd a = weighted(0, N / 2), b = weighted(N / 2, N / 2);
  out.error_estimate = (a - b).lpNorm<Eigen::Infinity>();
  return out;
}

RotationEstimate rotation_vector(const Orbit& orbit) {
  std::vector<VectorXd> lifted;
  lifted.reserve(orbit.points.size());
  for (const auto& p : orbit.points) lifted.push_back(p.x);
  return rotation_vector(lifted);
}

double invariance_residual(const KamState& state, const GeneratingHamiltonian& ham, int n_phi,
                           const VectorXd& t_omega) {
  const int n = ham.n();
  long total = 1;
  for (int d = 0; d < n; ++d) total *= n_phi;
  double worst = 0.0;
  for (long c = 0; c < total; ++c) {
    VectorXd phi(n);
    long rem = c;
    for (int d = 0; d < n; ++d) {
      phi[d] = two_pi * (rem % n_phi) / n_phi;
      rem /= n_phi;
    }
    PhasePoint img = apply_twist_map(ham, evaluate_conjugacy(state, phi));
    PhasePoint ref = evaluate_conjugacy(state, phi + t_omega);
    for (int d = 0; d < n; ++d) {
      worst = std::max(worst, std::abs(std::remainder(img.x[d] - ref.x[d], two_pi)));
      worst = std::max(worst, std::abs(img.y[d] - ref.y[d]));
    }
    for (int j = 0; j < ham.m(); ++j) {
      worst = std::max(worst, std::abs(img.u[j] - ref.u[j]));
      worst = std::max(worst, std::abs(img.v[j] - ref.v[j]));
    }
  }
  return worst;
}

double invariance_residual(const KamState& state, const GeneratingHamiltonian& ham, int n_phi) {
  return invariance_residual(state, ham, n_phi, state.limit_t_omega());
}

GeneratingHamiltonian scheme_generating_model(const SchemeModel& scheme, const VectorXd& xi,
                                              double t, const KamSchedule& sched) {
  const int n = scheme.n(), m = scheme.m();
  GeneratingHamiltonian g;
  g.freq = scheme.freq;
  g.normal.t = t;
  g.normal.theta_t = VectorXd(m);
  for (int j = 0; j < m; ++j) g.normal.theta_t[j] = 2.0 * std::atan(0.5 * scheme.B[j] * t);
  g.epsilon = scheme.epsilon;
  g.t = t;
  g.xi_center = xi;
  g.omega_shift = VectorXd::Zero(n);
  g.perturbation = FourierField(n, m);
  if (scheme.epsilon == 0.0) return g;

  GeneratingHamiltonian nref = g;  // integrable and elliptic parts only

  const int k_cut = std::min(sched.k_cap, sched.nx / 2 - 1);
  const std::vector<VectorXd> stencil = collocation_stencil(n, m, sched.sample_amp);
  const int nw = int(stencil.size());
  long nxs = 1;
  for (int a = 0; a < n; ++a) nxs *= sched.nx;

  std::vector<std::vector<VectorXd>> samples(nxs, std::vector<VectorXd>(nw));
  bool failed = false;
  std::string fail_msg;

#pragma omp parallel for schedule(static)
  for (long flat = 0; flat < nxs * nw; ++flat) {
    const long xidx = flat / nw;
    const int w = int(flat % nw);
    if (failed) continue;
    try {
      VectorXd x(n);
      long rem = xidx;
      for (int a = 0; a < n; ++a) {
        x[a] = two_pi * (rem % sched.nx) / sched.nx;
        rem /= sched.nx;
      }
      const VectorXd& st = stencil[w];
      VectorXd target(n + m);
      target.head(n) = xi + st.segment(0, n);
      target.tail(m) = st.segment(n + m, m);

      PhasePoint z;
      z.x = x;
      z.u = st.segment(n, m);
      VectorXd p = target;
      auto image = [&](const VectorXd& pp) {
        PhasePoint zz = z;
        zz.y = pp.head(n);
        zz.v = pp.tail(m);
        return apply_scheme_step(scheme, zz, t);
      };
      auto momenta = [&](const PhasePoint& q) {
        VectorXd out(n + m);
        out << q.y, q.v;
        return out;
      };
      PhasePoint img = image(p);
      MatrixXd jac(n + m, n + m);
      Eigen::PartialPivLU<MatrixXd> lu;
      bool have_jac = false, ok = false;
      double prev_res = std::numeric_limits<double>::infinity();
      auto refresh = [&]() {
        const double h = 1e-6;
        for (int a = 0; a < n + m; ++a) {
          VectorXd pp = p, pm = p;
          pp[a] += h;
          pm[a] -= h;
          jac.col(a) = (momenta(image(pp)) - momenta(image(pm))) / (2 * h);
        }
        lu.compute(jac);
        have_jac = true;
      };
      int refreshes = 0;
      for (int it = 0; it < 80; ++it) {
        VectorXd res = momenta(img) - target;
        const double rn = res.lpNorm<Eigen::Infinity>();
        if (rn < 1e-15) {
          ok = true;
          break;
        }
        if (rn >= 0.5 * prev_res && have_jac) {
          if (refreshes < 2) {
            refresh();
            ++refreshes;
          } else if (rn < 1e-13) {
            ok = true;
            break;
          }
        }
        prev_res = rn;
        if (!have_jac) refresh();
        p -= lu.solve(res);
        img = image(p);
      }
      if (!ok) throw ConvergenceFailure("scheme_generating_model: momentum matching stalled");

      VectorXd grad(2 * (n + m));
      grad.segment(0, n) = (p.head(n) - xi) - st.segment(0, n);  // d/dx
      grad.segment(n, m) = p.tail(m) - st.segment(n + m, m);     // d/du
      grad.segment(n + m, n) = img.x - z.x;                      // d/dyhat
      grad.segment(n + m + n, m) = img.u - z.u;                  // d/dvhat
      Jet2 ref = nref.jet(z.x, z.u, st.segment(0, n), st.segment(n + m, m));
      samples[xidx][w] = grad - ref.grad;
    } catch (const std::exception& e) {
#pragma omp critical
      {
        failed = true;
        fail_msg = e.what();
      }
    }
  }
  if (failed) throw ConvergenceFailure("scheme_generating_model: " + fail_msg);

  FourierField fitted =
      fit_field_from_gradients(n, m, sched.nx, k_cut, 4, stencil, samples);
  g.perturbation = fitted.pruned(3e-14).scaled(1.0 / t);
  return g;
}

TwoStepComparison scheme_two_step_compare(const SchemeModel& scheme, const VectorXd& xi,
                                          const std::vector<double>& t_ladder,
                                          const KamSchedule& sched) {
  TwoStepComparison out;
  out.t = t_ladder;
  for (double t : t_ladder) {
    GeneratingHamiltonian g = scheme_generating_model(scheme, xi, t, sched);
    KamState st = run_iteration(g, sched);
    out.omega.push_back(st.limit_t_omega() / t);
  }
  const double half_s = 0.5 * scheme.scheme_order;
  for (size_t i = 0; i + 1 < t_ladder.size(); ++i) {
    const double diff = (out.omega[i] - out.omega[i + 1]).lpNorm<Eigen::Infinity>();
    const double gap = std::pow(t_ladder[i], half_s) - std::pow(t_ladder[i + 1], half_s);
    out.omega_diff.push_back(diff);
    out.step_gap.push_back(gap);
    out.ratio.push_back(gap > 0.0 ? diff / gap : 0.0);
  }
  return out;
}

std::vector<SurvivalRow> survival_sweep(const std::string& preset,
                                        const std::vector<double>& eps_grid,
                                        const std::vector<double>& t_grid,
                                        const SurvivalParams& params, const KamSchedule& sched) {
  std::vector<SurvivalRow> rows;
  for (double t : t_grid) {
    for (double eps : eps_grid) {
      ModelPreset model = standard_test_model(preset, eps, t);
      const int n = model.freq.n;
      const ParamBox& box = model.freq.domain;

      SurvivalRow row;
      row.eps = eps;
      row.t = t;
      int pass_screen = 0, pass_conv = 0, pass_res = 0;
      for (int s = 0; s < params.n_xi; ++s) {
        // Deterministic stratified samples of the margin-shrunk box.
        VectorXd xi(n);
        std::mt19937_64 rng(fnv1a64("survival" + std::to_string(s)));
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (int d = 0; d < n; ++d) {
          const double lo = box.lo[d] + box.margin, hi = box.hi[d] - box.margin;
          const double frac = (n == 1) ? (s + 0.5) / params.n_xi : unif(rng);
          xi[d] = lo + (hi - lo) * frac;
        }

        ScreenParams sp;
        sp.gamma_v = params.gamma;
        sp.tau = sched.tau;
        sp.t = t;
        sp.k_max = params.k_max;
        sp.K_hat = khat(model.freq, 1.0, eps);
        sp.K_hat_prime = khat_prime(model.freq, model.scheme.B, 1.0, eps);
        VectorXd theta(model.scheme.B.size());
        for (int j = 0; j < theta.size(); ++j) theta[j] = std::atan(model.scheme.B[j] * t);
        ResonanceReport rep =
            screen_small_divisors(t * model.freq.omega(xi), theta, xi, sp);
        if (!rep.passed) continue;
        ++pass_screen;

        GeneratingHamiltonian ham = model.ham;
        ham.xi_center = xi;
        try {
          KamState st = run_iteration(ham, sched);
          if (!st.converged) continue;
          ++pass_conv;
          if (invariance_residual(st, ham, 16) <= params.residual_tol) ++pass_res;
        } catch (const std::exception&) {
          continue;
        }
      }
      row.screen_pass = double(pass_screen) / params.n_xi;
      row.converged = double(pass_conv) / params.n_xi;
      row.residual_ok = double(pass_res) / params.n_xi;
      row.fraction = row.residual_ok;
      rows.push_back(row);
    }
  }
  return rows;
}

std::string survival_csv(const std::vector<SurvivalRow>& rows) {
  std::ostringstream os;
  os << "eps,t,screen_pass,converged,residual_ok,fraction\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.eps, r.t,
                  r.screen_pass, r.converged, r.residual_ok, r.fraction);
    os << buf;
  }
  return os.str();
}

}  // namespace kamtori
