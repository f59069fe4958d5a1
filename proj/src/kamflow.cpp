#include "kamtori/kamflow.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>

#include <json.hpp>

#include "kamtori/util.hpp"

namespace kamtori {

GeneratingHamiltonian generator_of(const FourierField& F) {
  GeneratingHamiltonian g;
  const int n = F.n(), m = F.m();
  g.freq.n = n;
  g.freq.h = [](const VectorXd&) { return 0.0; };
  g.freq.omega = [n](const VectorXd&) { return VectorXd::Zero(n).eval(); };
  g.freq.hess_h = [n](const VectorXd&) { return MatrixXd::Zero(n, n).eval(); };
  g.normal.theta_t = VectorXd::Zero(m);
  g.perturbation = F;
  g.t = 1.0;
  g.xi_center = VectorXd::Zero(n);
  g.omega_shift = VectorXd::Zero(n);
  return g;
}

PhasePoint apply_step_transform(const StepTransform& tr, const PhasePoint& z) {
  PhasePoint w = z;
  for (int j = 0; j < int(tr.lambda.size()); ++j) {
    const double u = z.u[j], v = z.v[j];
    w.u[j] = u / tr.lambda[j] - tr.beta[j] * v;
    w.v[j] = tr.lambda[j] * v;
  }
  if (!tr.F_gen.empty()) w = apply_twist_map(generator_of(tr.F_gen), w);
  return w;
}

PhasePoint apply_step_transform_inverse(const StepTransform& tr, const PhasePoint& z) {
  PhasePoint w = z;
  if (!tr.F_gen.empty()) w = apply_twist_map_inverse(generator_of(tr.F_gen), w);
  for (int j = 0; j < int(tr.lambda.size()); ++j) {
    const double u = w.u[j], v = w.v[j];
    w.v[j] = v / tr.lambda[j];
    w.u[j] = tr.lambda[j] * u + tr.beta[j] * v;
  }
  return w;
}

PhasePoint apply_conjugacy(const KamState& state, const PhasePoint& z) {
  PhasePoint w = z;
  for (int i = int(state.transforms.size()) - 1; i >= 0; --i)
    w = apply_step_transform(state.transforms[i], w);
  return w;
}

PhasePoint evaluate_conjugacy(const KamState& state, const VectorXd& phi) {
  PhasePoint z;
  z.x = phi;
  z.u = VectorXd::Zero(state.ham.m());
  z.y = VectorXd::Zero(state.ham.n());
  z.v = VectorXd::Zero(state.ham.m());
  return apply_conjugacy(state, z);
}

std::vector<VectorXd> collocation_stencil(int n, int m, double r) {
  // Layout [yhat (n); u (m); vhat (m)]. yhat scales with r^2 (grading weight
  // two), the normal directions with r. Three levels suffice for the action
  // powers, five for the normal powers up to four.
  const std::vector<double> ylev = {-1.0, 0.0, 1.0};
  const std::vector<double> ulev = {-1.0, -0.5, 0.0, 0.5, 1.0};
  std::vector<VectorXd> out;
  const int dim = n + 2 * m;
  std::vector<int> idx(dim, 0);
  auto level_count = [&](int a) { return a < n ? int(ylev.size()) : int(ulev.size()); };
  while (true) {
    VectorXd w(dim);
    for (int a = 0; a < dim; ++a)
      w[a] = a < n ? ylev[idx[a]] * r * r : ulev[idx[a]] * r;
    out.push_back(w);
    int a = 0;
    for (; a < dim; ++a) {
      if (++idx[a] < level_count(a)) break;
      idx[a] = 0;
    }
    if (a == dim) break;
  }
  return out;
}

namespace {

struct BasisMode {
  std::vector<int> l, i, j;
};

std::vector<BasisMode> basis_modes(int n, int m, int max_degree) {
  std::vector<BasisMode> out;
  std::vector<int> l(n, 0), i(m, 0), j(m, 0);
  // Enumerates all graded monomials with 2|l| + |i| + |j| <= max_degree.
  std::function<void(int, int)> rec = [&](int slot, int degree) {
    const int total = n + 2 * m;
    if (slot == total) {
      out.push_back(BasisMode{l, i, j});
      return;
    }
    int* cell;
    int weight;
    if (slot < n) {
      cell = &l[slot];
      weight = 2;
    } else if (slot < n + m) {
      cell = &i[slot - n];
      weight = 1;
    } else {
      cell = &j[slot - n - m];
      weight = 1;
    }
    for (int p = 0; p * weight <= degree; ++p) {
      *cell = p;
      rec(slot + 1, degree - p * weight);
    }
    *cell = 0;
  };
  rec(0, max_degree);
  return out;
}

double power(double x, int p) {
  double r = 1.0;
  for (int q = 0; q < p; ++q) r *= x;
  return r;
}

// Monomial value and first derivatives at a stencil point w = [yhat; u; vhat].
void monomial_jet(const BasisMode& md, const VectorXd& w, int n, int m, double& val,
                  VectorXd& grad) {
  const int dim = n + 2 * m;
  std::vector<double> f(dim), df(dim);
  auto pw = [&](int slot, int p) {
    f[slot] = power(w[slot], p);
    df[slot] = p > 0 ? p * power(w[slot], p - 1) : 0.0;
  };
  for (int a = 0; a < n; ++a) pw(a, md.l[a]);
  for (int a = 0; a < m; ++a) pw(n + a, md.i[a]);
  for (int a = 0; a < m; ++a) pw(n + m + a, md.j[a]);
  val = 1.0;
  for (int a = 0; a < dim; ++a) val *= f[a];
  grad.setZero(dim);
  for (int a = 0; a < dim; ++a) {
    double g = df[a];
    if (g == 0.0) continue;
    for (int b = 0; b < dim; ++b)
      if (b != a) g *= f[b];
    grad[a] = g;
  }
}

std::vector<std::vector<int>> k_box(int n, int k_fit) {
  std::vector<std::vector<int>> out;
  std::vector<int> k(n, -k_fit);
  while (true) {
    out.push_back(k);
    int a = 0;
    for (; a < n; ++a) {
      if (++k[a] <= k_fit) break;
      k[a] = -k_fit;
    }
    if (a == n) break;
  }
  return out;
}

}  // namespace

FourierField fit_field_from_gradients(
    int n, int m, int nx, int k_fit, int max_degree,
    const std::vector<VectorXd>& stencil,
    const std::vector<std::vector<VectorXd>>& grad_samples) {
  const int dim = 2 * (n + m);
  const int nw = int(stencil.size());
  const std::vector<BasisMode> basis = basis_modes(n, m, max_degree);
  const int nb = int(basis.size());

  // Precompute monomial jets on the stencil.
  std::vector<std::vector<double>> mval(nw, std::vector<double>(nb));
  std::vector<std::vector<VectorXd>> mgrad(nw, std::vector<VectorXd>(nb));
  for (int w = 0; w < nw; ++w)
    for (int b = 0; b < nb; ++b)
      monomial_jet(basis[b], stencil[w], n, m, mval[w][b], mgrad[w][b]);

  // Angle grid multi-indices.
  std::vector<std::vector<int>> xs;
  {
    std::vector<int> ix(n, 0);
    while (true) {
      xs.push_back(ix);
      int a = 0;
      for (; a < n; ++a) {
        if (++ix[a] < nx) break;
        ix[a] = 0;
      }
      if (a == n) break;
    }
  }
  const double norm = 1.0 / double(xs.size());

  FourierField raw(n, m);
  for (const auto& k : k_box(n, k_fit)) {
    // DFT of every gradient slot at this k.
    MatrixXcd G(nw, dim);
    G.setZero();
    for (std::size_t xi = 0; xi < xs.size(); ++xi) {
      double phase = 0.0;
      for (int a = 0; a < n; ++a) phase += k[a] * (two_pi * xs[xi][a] / nx);
      const Complex e = std::polar(norm, -phase);
      for (int w = 0; w < nw; ++w)
        for (int d = 0; d < dim; ++d) G(w, d) += e * grad_samples[xi][w][d];
    }

    // Least squares for the mode coefficients at this k.
    MatrixXcd A(nw * dim, nb);
    VectorXcd rhs(nw * dim);
    for (int w = 0; w < nw; ++w)
      for (int d = 0; d < dim; ++d) {
        const int row = w * dim + d;
        rhs[row] = G(w, d);
        for (int b = 0; b < nb; ++b) {
          Complex cell(0.0, 0.0);
          if (d < n) {
            cell = Complex(0.0, double(k[d])) * mval[w][b];
          } else if (d < n + m) {
            cell = mgrad[w][b][n + (d - n)];           // d/du
          } else if (d < 2 * n + m) {
            cell = mgrad[w][b][d - n - m];             // d/dyhat
          } else {
            cell = mgrad[w][b][n + m + (d - 2 * n - m)];  // d/dvhat
          }
          A(row, b) = cell;
        }
      }
    // Drop unobservable columns (the constant at k = 0) and scale the rest.
    std::vector<int> active;
    VectorXd scale(nb);
    for (int b = 0; b < nb; ++b) {
      const double cn = A.col(b).cwiseAbs().maxCoeff();
      if (cn > 1e-300) {
        active.push_back(b);
        scale[b] = cn;
      }
    }
    MatrixXcd As(nw * dim, int(active.size()));
    for (std::size_t b = 0; b < active.size(); ++b)
      As.col(b) = A.col(active[b]) / scale[active[b]];
    VectorXcd sol = As.colPivHouseholderQr().solve(rhs);
    for (std::size_t b = 0; b < active.size(); ++b) {
      const Complex c = sol[b] / scale[active[b]];
      if (std::abs(c) < 1e-18) continue;
      const BasisMode& md = basis[active[b]];
      raw.add_term(ModeKey{k, md.l, md.i, md.j}, c);
    }
  }

  // Symmetrize the reality pairing.
  FourierField out(n, m);
  for (const auto& [key, c] : raw.coeffs()) {
    ModeKey nk = key;
    for (int a = 0; a < n; ++a) nk.k[a] = -nk.k[a];
    out.add_term(key, 0.5 * (c + std::conj(raw.coeff(nk))));
  }
  return out.pruned(1e-18);
}

namespace {

VectorXd momenta_of(const PhasePoint& p) {
  VectorXd out(p.y.size() + p.v.size());
  out << p.y, p.v;
  return out;
}

}  // namespace

KamStepOutcome kam_step(const GeneratingHamiltonian& ham, double s, double r, double gamma_v,
                        const KamSchedule& sched) {
  (void)s;
  (void)r;
  const int n = ham.n(), m = ham.m();
  const double t = ham.t;
  const int k_cut = std::min(sched.k_cap, sched.nx / 2 - 1);

  auto [low, high] = truncate_order2(ham.perturbation);
  FourierField R = low.truncated(k_cut, 2).scaled(t);
  const VectorXd t_omega = ham.t_omega_at(VectorXd::Zero(n));

  // Small-divisor screen over the support of R.
  for (const auto& [key, c] : R.coeffs()) {
    const int knorm = key.k_norm1();
    const double margin = min_divisor_margin({key.k}, t_omega, ham.normal);
    const double threshold =
        t * gamma_v * (knorm == 0 ? 1.0 : std::pow(double(knorm), -sched.tau));
    if (margin < threshold)
      throw ScreenFailure("kam_step: divisor margin " + std::to_string(margin) +
                          " under threshold " + std::to_string(threshold) + " at |k|=" +
                          std::to_string(knorm));
  }

  HomologicalSolution sol = solve_homological(R, t_omega, ham.normal);
  EllipticRenormalization ren = normalize_elliptic(ham.normal, sol.means);

  KamStepOutcome out;
  out.means = sol.means;
  out.min_divisor_margin = sol.min_divisor_margin;
  out.transform.F_gen = sol.F;
  out.transform.lambda = ren.lambda;
  out.transform.beta = ren.beta;

  GeneratingHamiltonian next = ham;
  next.normal = ren.next;
  next.omega_shift = ham.omega_shift + sol.means.t_omega_hat;
  next.perturbation = FourierField(n, m);

  // Sample the gradient of the conjugated generating function
  // tH+ = (C^{-1} ∘ Phi ∘ C in mixed variables) and project the deviation
  // from tN+ back onto Fourier-polynomial form.
  const std::vector<VectorXd> stencil = collocation_stencil(n, m, sched.sample_amp);
  const int nw = int(stencil.size());
  int nxs = 1;
  for (int a = 0; a < n; ++a) nxs *= sched.nx;

  std::vector<std::vector<VectorXd>> samples(nxs, std::vector<VectorXd>(nw));
  const StepTransform& tr = out.transform;
  bool failed = false;
  std::string fail_msg;

#pragma omp parallel for schedule(static)
  for (int flat = 0; flat < nxs * nw; ++flat) {
    const int xi = flat / nw, w = flat % nw;
    if (failed) continue;
    try {
      VectorXd x(n);
      int rem = xi;
      for (int a = 0; a < n; ++a) {
        x[a] = two_pi * (rem % sched.nx) / sched.nx;
        rem /= sched.nx;
      }
      const VectorXd& st = stencil[w];
      PhasePoint z;
      z.x = x;
      z.u = st.segment(n, m);
      z.y = st.segment(0, n);
      z.v = st.segment(n + m, m);
      const VectorXd target = momenta_of(z);

      // Newton in the starting momenta so the image momenta hit the stencil.
      VectorXd p = target;
      auto image = [&](const VectorXd& pp) {
        PhasePoint zz = z;
        zz.y = pp.head(n);
        zz.v = pp.tail(m);
        PhasePoint img = apply_step_transform_inverse(
            tr, apply_twist_map(ham, apply_step_transform(tr, zz)));
        return img;
      };
      PhasePoint img = image(p);
      MatrixXd jac(n + m, n + m);
      Eigen::PartialPivLU<MatrixXd> lu;
      bool have_jac = false;
      bool ok = false;
      double prev_res = std::numeric_limits<double>::infinity();
      auto refresh = [&]() {
        const double h = 1e-6;
        for (int a = 0; a < n + m; ++a) {
          VectorXd pp = p, pm = p;
          pp[a] += h;
          pm[a] -= h;
          jac.col(a) = (momenta_of(image(pp)) - momenta_of(image(pm))) / (2 * h);
        }
        lu.compute(jac);
        have_jac = true;
      };
      int refreshes = 0;
      for (int it = 0; it < 80; ++it) {
        VectorXd res = momenta_of(img) - target;
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
      if (!ok) throw ConvergenceFailure("kam_step: momentum matching did not converge");

      // Mixed-variable gradient of tH+ from the generating relations, with
      // the analytic tN+ part removed.
      VectorXd g(2 * (n + m));
      g.segment(0, n) = p.head(n) - z.y;           // d/dx
      g.segment(n, m) = p.tail(m) - z.v;           // d/du
      g.segment(n + m, n) = img.x - z.x;           // d/dyhat
      g.segment(n + m + n, m) = img.u - z.u;       // d/dvhat
      Jet2 nref = next.jet(z.x, z.u, z.y, z.v);
      samples[xi][w] = g - nref.grad;
    } catch (const std::exception& e) {
#pragma omp critical
      {
        failed = true;
        fail_msg = e.what();
      }
    }
  }
  if (failed) throw ConvergenceFailure("kam_step sampling: " + fail_msg);

  FourierField fitted =
      fit_field_from_gradients(n, m, sched.nx, k_cut, 4, stencil, samples);
  // Coefficients below the sampling noise floor are numerically meaningless;
  // keeping them would pollute the weighted norm once r is small.
  next.perturbation = fitted.pruned(3e-14).scaled(1.0 / t);
  out.next = next;
  return out;
}

KamState run_iteration(const GeneratingHamiltonian& ham0, const KamSchedule& sched) {
  KamState st;
  st.ham = ham0;
  st.sched = sched;
  st.s = sched.s0;
  st.r = sched.r0;
  st.norm0 = weighted_norm(ham0.perturbation, sched.s0, sched.r0);
  const double eps_scale = ham0.epsilon > 0.0 ? ham0.epsilon : std::max(st.norm0, 1.0);
  st.eps = st.norm0 == 0.0 ? 0.0 : eps_scale;

  if (st.norm0 == 0.0) {
    st.converged = true;
    return st;
  }

  const double nu = sched.nu(ham0.n()), nu_bar = sched.nu_bar();
  for (int v = 0; v < sched.max_steps; ++v) {
    if (st.eps <= sched.stop_eps && v >= sched.min_steps) {
      st.converged = true;
      break;
    }
    const double rho_v = sched.rho(v), gamma_v = sched.gamma_v(v);
    KamStepOutcome step = kam_step(st.ham, st.s, st.r, gamma_v, sched);

    // Radius ratio coupled to the current error as eta ~ eps^{1/3}, clamped.
    // The raw schedule formula eps/(gamma_v^nu_bar rho_v^nu) leaves the unit
    // interval at practical parameter sizes, so the cube-root coupling is
    // applied to the relative error directly.
    (void)nu;
    (void)nu_bar;
    double eta = std::cbrt(st.eps / eps_scale);
    eta = std::clamp(eta, sched.eta_min, sched.eta_max);

    const double s_next = st.s - 5.0 * rho_v;
    const double r_next = eta * st.r;
    const double norm_next = weighted_norm(step.next.perturbation, s_next, r_next);
    const double eps_next = eps_scale * norm_next / st.norm0;

    KamTraceEntry te;
    te.v = v;
    te.s_v = st.s;
    te.r_v = st.r;
    te.rho_v = rho_v;
    te.gamma_v = gamma_v;
    te.eps_v = st.eps;
    te.min_divisor_margin = step.min_divisor_margin;
    te.eta_v = eta;
    te.omega = step.next.t_omega_at(VectorXd::Zero(ham0.n())) / step.next.t;
    te.theta = step.next.normal.theta_t;
    st.trace.push_back(te);

    if (eps_next >= st.eps && eps_next > sched.stop_eps)
      throw ConvergenceFailure("run_iteration: contraction stalled at step " +
                               std::to_string(v) + " (eps " + std::to_string(st.eps) +
                               " -> " + std::to_string(eps_next) + ")");

    st.ham = step.next;
    st.transforms.push_back(step.transform);
    st.s = s_next;
    st.r = r_next;
    st.eps = eps_next;
    st.v = v + 1;
    if (st.eps <= sched.stop_eps && st.v >= sched.min_steps) {
      st.converged = true;
      break;
    }
  }
  return st;
}

std::string manifest_json(const KamState& st) {
  nlohmann::json j;
  j["schedule"] = {{"gamma", st.sched.gamma},   {"tau", st.sched.tau},
                   {"nbar", st.sched.nbar},     {"L", st.sched.L},
                   {"s0", st.sched.s0},         {"r0", st.sched.r0},
                   {"stop_eps", st.sched.stop_eps}, {"max_steps", st.sched.max_steps},
                   {"k_cap", st.sched.k_cap},   {"nx", st.sched.nx}};
  j["converged"] = st.converged;
  j["steps"] = st.v;
  j["eps_final"] = st.eps;
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& te : st.trace) {
    nlohmann::json e;
    e["v"] = te.v;
    e["s_v"] = te.s_v;
    e["r_v"] = te.r_v;
    e["rho_v"] = te.rho_v;
    e["gamma_v"] = te.gamma_v;
    e["eps_v"] = te.eps_v;
    e["min_divisor_margin"] = te.min_divisor_margin;
    e["eta_v"] = te.eta_v;
    e["omega"] = std::vector<double>(te.omega.data(), te.omega.data() + te.omega.size());
    e["theta"] = std::vector<double>(te.theta.data(), te.theta.data() + te.theta.size());
    trace.push_back(e);
  }
  j["trace"] = trace;
  const VectorXd tw = st.limit_t_omega();
  const VectorXd th = st.limit_theta();
  j["limit"] = {
      {"t_omega", std::vector<double>(tw.data(), tw.data() + tw.size())},
      {"theta", std::vector<double>(th.data(), th.data() + th.size())},
  };
  return j.dump(2);
}

}  // namespace kamtori
