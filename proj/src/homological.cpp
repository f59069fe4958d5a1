#include "kamtori/homological.hpp"

#include <cmath>
#include <stdexcept>

#include "kamtori/util.hpp"

namespace kamtori {

namespace {

// Index of the single nonzero entry of a multi-index, or -1.
int single_index(const std::vector<int>& v, int value) {
  int found = -1;
  for (int a = 0; a < int(v.size()); ++a) {
    if (v[a] == 0) continue;
    if (v[a] != value || found >= 0) return -2;
    found = a;
  }
  return found;
}

int order(const std::vector<int>& v) {
  int s = 0;
  for (int x : v) s += x;
  return s;
}

bool is_zero(const std::vector<int>& v) {
  for (int x : v) if (x != 0) return false;
  return true;
}

Order2Mode empty_mode(int n, int m) {
  Order2Mode md;
  md.c100 = VectorXcd::Zero(n);
  md.c010 = VectorXcd::Zero(m);
  md.c001 = VectorXcd::Zero(m);
  md.c011 = MatrixXcd::Zero(m, m);
  md.c020 = MatrixXcd::Zero(m, m);
  md.c002 = MatrixXcd::Zero(m, m);
  return md;
}

}  // namespace

double NormalFormUpdate::max_abs() const {
  double v = std::abs(c000_mean);
  for (const VectorXd* blk : {&t_omega_hat, &a_hat, &b_hat, &c_hat})
    if (blk->size()) v = std::max(v, blk->lpNorm<Eigen::Infinity>());
  return v;
}

Order2Components extract_order2(const FourierField& field) {
  Order2Components out;
  out.n = field.n();
  out.m = field.m();
  for (const auto& [key, c] : field.coeffs()) {
    if (key.graded_degree() > 2)
      throw std::invalid_argument("extract_order2: field has degree above two");
    auto it = out.modes.find(key.k);
    if (it == out.modes.end())
      it = out.modes.emplace(key.k, empty_mode(out.n, out.m)).first;
    Order2Mode& md = it->second;
    const int oi = order(key.i), oj = order(key.j), ol = order(key.l);
    if (ol == 1) {
      md.c100[single_index(key.l, 1)] += c;
    } else if (oi == 0 && oj == 0) {
      md.c000 += c;
    } else if (oi == 1 && oj == 0) {
      md.c010[single_index(key.i, 1)] += c;
    } else if (oi == 0 && oj == 1) {
      md.c001[single_index(key.j, 1)] += c;
    } else if (oi == 1 && oj == 1) {
      md.c011(single_index(key.i, 1), single_index(key.j, 1)) += c;
    } else if (oi == 2) {
      const int a2 = single_index(key.i, 2);
      if (a2 >= 0) {
        md.c020(a2, a2) += 2.0 * c;
      } else {
        int first = -1, second = -1;
        for (int a = 0; a < out.m; ++a)
          if (key.i[a] == 1) (first < 0 ? first : second) = a;
        md.c020(first, second) += c;
        md.c020(second, first) += c;
      }
    } else {
      const int a2 = single_index(key.j, 2);
      if (a2 >= 0) {
        md.c002(a2, a2) += 2.0 * c;
      } else {
        int first = -1, second = -1;
        for (int a = 0; a < out.m; ++a)
          if (key.j[a] == 1) (first < 0 ? first : second) = a;
        md.c002(first, second) += c;
        md.c002(second, first) += c;
      }
    }
  }
  return out;
}

FourierField assemble_order2(const Order2Components& comps) {
  const int n = comps.n, m = comps.m;
  FourierField out(n, m);
  const std::vector<int> zl(n, 0), zi(m, 0);
  for (const auto& [k, md] : comps.modes) {
    ModeKey key{k, zl, zi, zi};
    out.add_term(key, md.c000);
    for (int a = 0; a < n; ++a) {
      key.l[a] = 1;
      out.add_term(key, md.c100[a]);
      key.l[a] = 0;
    }
    for (int a = 0; a < m; ++a) {
      key.i[a] = 1;
      out.add_term(key, md.c010[a]);
      key.i[a] = 0;
      key.j[a] = 1;
      out.add_term(key, md.c001[a]);
      key.j[a] = 0;
    }
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) {
        key.i[a] += 1;
        key.j[b] += 1;
        out.add_term(key, md.c011(a, b));
        key.j[b] -= 1;
        key.i[b] += 1;
        if (b >= a) out.add_term(key, a == b ? md.c020(a, a) * 0.5 : md.c020(a, b));
        key.i[b] -= 1;
        key.i[a] -= 1;
        key.j[a] += 1;
        key.j[b] += 1;
        if (b >= a) out.add_term(key, a == b ? md.c002(a, a) * 0.5 : md.c002(a, b));
        key.j[b] -= 1;
        key.j[a] -= 1;
      }
  }
  return out.pruned(0.0);
}

double min_divisor_margin(const std::vector<std::vector<int>>& k_support,
                          const VectorXd& t_omega, const EllipticNormalData& normal) {
  const int m = normal.m();
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& k : k_support) {
    double phi = 0.0;
    for (int a = 0; a < int(k.size()); ++a) phi += k[a] * t_omega[a];
    if (!is_zero(k)) margin = std::min(margin, dist_to_2pi_lattice(phi));
    for (int j = 0; j < m; ++j) {
      margin = std::min(margin, dist_to_2pi_lattice(phi - normal.theta_t[j]));
      margin = std::min(margin, dist_to_2pi_lattice(phi + normal.theta_t[j]));
      for (int i = 0; i <= j; ++i) {
        margin = std::min(margin, dist_to_2pi_lattice(phi - normal.theta_t[i] - normal.theta_t[j]));
        margin = std::min(margin, dist_to_2pi_lattice(phi + normal.theta_t[i] + normal.theta_t[j]));
        if (i < j) {
          margin =
              std::min(margin, dist_to_2pi_lattice(phi - normal.theta_t[i] + normal.theta_t[j]));
          margin =
              std::min(margin, dist_to_2pi_lattice(phi + normal.theta_t[i] - normal.theta_t[j]));
        }
      }
    }
  }
  return margin;
}

HomologicalSolution solve_homological(const FourierField& R, const VectorXd& t_omega,
                                      const EllipticNormalData& normal) {
  Order2Components comps = extract_order2(R);
  const int n = comps.n, m = comps.m;
  const VectorXd av = normal.sec(), bv = normal.tan();

  HomologicalSolution sol;
  sol.means.t_omega_hat = VectorXd::Zero(n);
  sol.means.a_hat = VectorXd::Zero(m);
  sol.means.b_hat = VectorXd::Zero(m);
  sol.means.c_hat = VectorXd::Zero(m);

  Order2Components fcomps;
  fcomps.n = n;
  fcomps.m = m;

  std::vector<std::vector<int>> support;
  for (auto& [k, md] : comps.modes) {
    support.push_back(k);
    const bool kzero = is_zero(k);
    double phi = 0.0;
    for (int a = 0; a < n; ++a) phi += k[a] * t_omega[a];
    const Complex e = std::polar(1.0, phi);

    Order2Mode f = empty_mode(n, m);
    if (kzero) {
      sol.means.c000_mean = md.c000.real();
      for (int a = 0; a < n; ++a) sol.means.t_omega_hat[a] = md.c100[a].real();
    } else {
      f.c000 = md.c000 / (e - 1.0);
      for (int a = 0; a < n; ++a) f.c100[a] = md.c100[a] / (e - 1.0);
    }

    for (int j = 0; j < m; ++j) {
      const double a = av[j], b = bv[j];
      MatrixXcd M(2, 2);
      M << a * e - 1.0, -b, b * e, e - a;
      Eigen::Vector2cd rhs(md.c010[j], md.c001[j]);
      Eigen::Vector2cd x = M.partialPivLu().solve(rhs);
      f.c010[j] = x[0];
      f.c001[j] = x[1];
    }

    for (int j = 0; j < m; ++j) {
      const double a = av[j], b = bv[j];
      Complex r11 = md.c011(j, j), r20 = md.c020(j, j), r02 = md.c002(j, j);
      if (kzero) {
        sol.means.a_hat[j] = r11.real();
        sol.means.b_hat[j] = r20.real();
        sol.means.c_hat[j] = r02.real();
        continue;  // remaining mean system has rank two with zero right side
      }
      MatrixXcd M(3, 3);
      M << a * (e - 1.0), a * b * e, -a * b,
           -2.0 * b, a * a * e - 1.0, -b * b,
           2.0 * b * e, b * b * e, e - a * a;
      Eigen::Vector3cd rhs(r11, r20, r02);
      Eigen::Vector3cd x = M.partialPivLu().solve(rhs);
      f.c011(j, j) = x[0];
      f.c020(j, j) = x[1];
      f.c002(j, j) = x[2];
    }
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < j; ++i) {
        const double ai = av[i], aj = av[j], bi = bv[i], bj = bv[j];
        MatrixXcd M(4, 4);
        // Unknowns (F011_ij, F011_ji, F020_ij, F002_ij).
        M << e * aj - ai, 0.0, e * bi * aj, -ai * bj,
             0.0, e * ai - aj, e * bj * ai, -aj * bi,
             -bi, -bj, e * ai * aj - 1.0, -bi * bj,
             e * bj, e * bi, e * bi * bj, e - ai * aj;
        Eigen::Vector4cd rhs(md.c011(i, j), md.c011(j, i), md.c020(i, j), md.c002(i, j));
        Eigen::Vector4cd x = M.partialPivLu().solve(rhs);
        f.c011(i, j) = x[0];
        f.c011(j, i) = x[1];
        f.c020(i, j) = f.c020(j, i) = x[2];
        f.c002(i, j) = f.c002(j, i) = x[3];
      }
    fcomps.modes.emplace(k, std::move(f));
  }

  sol.F = assemble_order2(fcomps);
  sol.min_divisor_margin = min_divisor_margin(support, t_omega, normal);
  if (sol.F.reality_defect() > 1e-10)
    throw std::runtime_error("solve_homological: solution lost reality pairing");
  return sol;
}

FourierField apply_L(const FourierField& F, const VectorXd& t_omega,
                     const EllipticNormalData& normal) {
  Order2Components comps = extract_order2(F);
  const int n = comps.n, m = comps.m;
  const VectorXd av = normal.sec(), bv = normal.tan();

  Order2Components out;
  out.n = n;
  out.m = m;
  for (const auto& [k, f] : comps.modes) {
    double phi = 0.0;
    for (int a = 0; a < n; ++a) phi += k[a] * t_omega[a];
    const Complex e = std::polar(1.0, phi);

    Order2Mode g = empty_mode(n, m);
    // Function form: tilde marks evaluation at x + t_omega, i.e. a factor e.
    g.c000 = e * f.c000 - f.c000;
    for (int a = 0; a < n; ++a) g.c100[a] = e * f.c100[a] - f.c100[a];
    for (int j = 0; j < m; ++j) {
      const double a = av[j], b = bv[j];
      g.c010[j] = a * e * f.c010[j] - f.c010[j] - b * f.c001[j];
      g.c001[j] = b * e * f.c010[j] + e * f.c001[j] - a * f.c001[j];
    }
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        const double ai = av[i], aj = av[j], bi = bv[i], bj = bv[j];
        g.c011(i, j) = aj * e * f.c011(i, j) + bi * aj * e * f.c020(i, j) -
                       ai * f.c011(i, j) - ai * bj * f.c002(i, j);
        if (i <= j) {
          const Complex l20 = ai * aj * e * f.c020(i, j) - f.c020(i, j) -
                              bi * bj * f.c002(i, j) - bi * f.c011(i, j) - bj * f.c011(j, i);
          const Complex l02 = bi * bj * e * f.c020(i, j) + e * f.c002(i, j) +
                              e * (bj * f.c011(i, j) + bi * f.c011(j, i)) -
                              ai * aj * f.c002(i, j);
          g.c020(i, j) = g.c020(j, i) = l20;
          g.c002(i, j) = g.c002(j, i) = l02;
        }
      }
    out.modes.emplace(k, std::move(g));
  }
  return assemble_order2(out);
}

EllipticRenormalization normalize_elliptic(const EllipticNormalData& normal,
                                           const NormalFormUpdate& means) {
  const int m = normal.m();
  EllipticRenormalization out;
  out.next = normal;
  out.lambda = VectorXd::Ones(m);
  out.beta = VectorXd::Zero(m);

  for (int j = 0; j < m; ++j) {
    const double abar = 1.0 / std::cos(normal.theta_t[j]) + means.a_hat[j];
    const double bbar = std::tan(normal.theta_t[j]) + means.b_hat[j];
    const double cbar = std::tan(normal.theta_t[j]) + means.c_hat[j];
    Eigen::Matrix2d omega_bar;
    omega_bar << abar - cbar * bbar / abar, cbar / abar, -bbar / abar, 1.0 / abar;

    auto conj_map = [&](double lam, double beta) {
      Eigen::Matrix2d T, Tinv;
      T << 1.0 / lam, -beta, 0.0, lam;
      Tinv << lam, beta, 0.0, 1.0 / lam;
      return (Tinv * omega_bar * T).eval();
    };
    auto constraints = [&](double lam, double beta) {
      Eigen::Matrix2d M = conj_map(lam, beta);
      return Eigen::Vector2d(M(0, 1) + M(1, 0), 1.0 - M(1, 0) * M(1, 0) - M(1, 1) * M(1, 1));
    };

    double lam = 1.0, beta = 0.0;
    bool done = false;
    for (int it = 0; it < 50; ++it) {
      Eigen::Vector2d g = constraints(lam, beta);
      if (g.lpNorm<Eigen::Infinity>() < 1e-14) {
        done = true;
        break;
      }
      const double h = 1e-7;
      Eigen::Matrix2d jac;
      jac.col(0) = (constraints(lam + h, beta) - constraints(lam - h, beta)) / (2 * h);
      jac.col(1) = (constraints(lam, beta + h) - constraints(lam, beta - h)) / (2 * h);
      Eigen::Vector2d step = jac.partialPivLu().solve(g);
      lam -= step[0];
      beta -= step[1];
    }
    if (!done) throw std::runtime_error("normalize_elliptic: Newton did not converge");

    Eigen::Matrix2d M = conj_map(lam, beta);
    const double a_plus = 1.0 / M(1, 1);
    const double b_plus = -M(1, 0) / M(1, 1);
    if (a_plus <= 0.0)
      throw std::runtime_error("normalize_elliptic: lost ellipticity");
    out.next.theta_t[j] = std::atan(b_plus);
    out.lambda[j] = lam;
    out.beta[j] = beta;
  }
  return out;
}

}  // namespace kamtori
