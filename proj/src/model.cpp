#include "kamtori/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kamtori/util.hpp"

namespace kamtori {

double EllipticNormalData::nonresonance_margin() const {
  const int mm = m();
  double margin = std::numeric_limits<double>::infinity();
  for (int j = 0; j < mm; ++j) {
    margin = std::min(margin, dist_to_2pi_lattice(theta_t[j]));
    for (int i = 0; i <= j; ++i) {
      margin = std::min(margin, dist_to_2pi_lattice(theta_t[i] + theta_t[j]));
      if (i < j) margin = std::min(margin, dist_to_2pi_lattice(theta_t[i] - theta_t[j]));
    }
  }
  return margin;
}

VectorXd GeneratingHamiltonian::t_omega_at(const VectorXd& yhat) const {
  VectorXd w = t * freq.omega(xi_center + yhat);
  if (omega_shift.size()) w += omega_shift;
  return w;
}

Jet2 GeneratingHamiltonian::jet(const VectorXd& x, const VectorXd& u, const VectorXd& yhat,
                                const VectorXd& vhat) const {
  const int nn = n(), mm = m();
  const int dim = 2 * (nn + mm);
  Jet2 out = perturbation.jet(x, u, yhat, vhat);
  out.value *= t;
  out.grad *= t;
  out.hess *= t;

  out.value += t * freq.h(xi_center + yhat);
  const VectorXd w = t * freq.omega(xi_center + yhat);
  const MatrixXd hh = t * freq.hess_h(xi_center + yhat);
  for (int a = 0; a < nn; ++a) {
    out.grad[nn + mm + a] += w[a];
    if (omega_shift.size()) {
      out.value += omega_shift[a] * yhat[a];
      out.grad[nn + mm + a] += omega_shift[a];
    }
    for (int b = 0; b < nn; ++b) out.hess(nn + mm + a, nn + mm + b) += hh(a, b);
  }

  const VectorXd sec = normal.sec(), tan = normal.tan();
  for (int j = 0; j < mm; ++j) {
    const double a1 = sec[j] - 1.0, bt = tan[j];
    const int su = nn + j, sv = nn + mm + nn + j;
    out.value += a1 * u[j] * vhat[j] + 0.5 * bt * (u[j] * u[j] + vhat[j] * vhat[j]);
    out.grad[su] += a1 * vhat[j] + bt * u[j];
    out.grad[sv] += a1 * u[j] + bt * vhat[j];
    out.hess(su, su) += bt;
    out.hess(sv, sv) += bt;
    out.hess(su, sv) += a1;
    out.hess(sv, su) += a1;
  }
  (void)dim;
  return out;
}

double SchemeModel::H0(const VectorXd& u, const VectorXd& y, const VectorXd& v) const {
  double val = freq.h(y);
  for (int j = 0; j < m(); ++j) val += 0.5 * B[j] * (u[j] * u[j] + v[j] * v[j]);
  return val;
}

Jet2 SchemeModel::jet(const VectorXd& x, const VectorXd& u, const VectorXd& y,
                      const VectorXd& v) const {
  const int nn = n(), mm = m();
  Jet2 out = H1.jet(x, u, y, v);
  out.value *= epsilon;
  out.grad *= epsilon;
  out.hess *= epsilon;

  out.value += freq.h(y);
  const VectorXd w = freq.omega(y);
  const MatrixXd hh = freq.hess_h(y);
  for (int a = 0; a < nn; ++a) {
    out.grad[nn + mm + a] += w[a];
    for (int b = 0; b < nn; ++b) out.hess(nn + mm + a, nn + mm + b) += hh(a, b);
  }
  for (int j = 0; j < mm; ++j) {
    const int su = nn + j, sv = nn + mm + nn + j;
    out.value += 0.5 * B[j] * (u[j] * u[j] + v[j] * v[j]);
    out.grad[su] += B[j] * u[j];
    out.grad[sv] += B[j] * v[j];
    out.hess(su, su) += B[j];
    out.hess(sv, sv) += B[j];
  }
  return out;
}

MatrixXd build_omega_matrix(const EllipticNormalData& data) {
  const int mm = data.m();
  MatrixXd omega = MatrixXd::Zero(2 * mm, 2 * mm);
  for (int j = 0; j < mm; ++j) {
    const double c = std::cos(data.theta_t[j]), s = std::sin(data.theta_t[j]);
    if (std::abs(c) < 1e-12)
      throw std::invalid_argument("build_omega_matrix: theta too close to pi/2, sec degenerate");
    omega(2 * j, 2 * j) = c;
    omega(2 * j, 2 * j + 1) = s;
    omega(2 * j + 1, 2 * j) = -s;
    omega(2 * j + 1, 2 * j + 1) = c;
  }
  return omega;
}

namespace {

ModeKey mode(std::vector<int> k, std::vector<int> l, std::vector<int> i, std::vector<int> j) {
  return ModeKey{std::move(k), std::move(l), std::move(i), std::move(j)};
}

// eps*(cos x + yhat + (u + vhat) cos x + (1/2)(u^2 + vhat^2)(1 + cos x)).
// The action and normal-direction terms keep the first-step frequency and
// elliptic corrections at O(eps), so driftless degeneracies cannot hide bugs.
FourierField twist11_perturbation() {
  FourierField p(1, 1);
  p.set_real_mode(mode({1}, {0}, {0}, {0}), 0.5);
  p.add_term(mode({0}, {1}, {0}, {0}), 1.0);
  p.set_real_mode(mode({1}, {0}, {1}, {0}), 0.5);
  p.set_real_mode(mode({1}, {0}, {0}, {1}), 0.5);
  p.add_term(mode({0}, {0}, {2}, {0}), 0.5);
  p.add_term(mode({0}, {0}, {0}, {2}), 0.5);
  p.set_real_mode(mode({1}, {0}, {2}, {0}), 0.25);
  p.set_real_mode(mode({1}, {0}, {0}, {2}), 0.25);
  return p;
}

FourierField twist21_perturbation() {
  FourierField p(2, 1);
  p.set_real_mode(mode({1, 0}, {0, 0}, {0}, {0}), 0.5);
  p.set_real_mode(mode({1, 1}, {0, 0}, {0}, {0}), 0.5);
  p.add_term(mode({0, 0}, {1, 0}, {0}, {0}), 1.0);
  p.set_real_mode(mode({1, 0}, {0, 0}, {1}, {0}), 0.5);
  p.set_real_mode(mode({0, 1}, {0, 0}, {0}, {1}), Complex(0.0, -0.5));
  p.add_term(mode({0, 0}, {0, 0}, {1}, {1}), 0.2);
  p.set_real_mode(mode({1, 0}, {0, 0}, {1}, {1}), 0.1);
  p.add_term(mode({0, 0}, {0, 0}, {2}, {0}), 0.15);
  p.add_term(mode({0, 0}, {0, 0}, {0}, {2}), 0.15);
  p.set_real_mode(mode({0, 1}, {0, 0}, {2}, {0}), 0.075);
  p.set_real_mode(mode({0, 1}, {0, 0}, {0}, {2}), 0.075);
  return p;
}

}  // namespace

ModelPreset standard_test_model(const std::string& preset, double eps, double t) {
  ModelPreset out;
  out.name = preset;
  if (preset == "twist-1-1") {
    out.freq.n = 1;
    out.freq.h = [](const VectorXd& y) { return 0.5 * y.squaredNorm(); };
    out.freq.omega = [](const VectorXd& y) { return y; };
    out.freq.hess_h = [](const VectorXd& y) { return MatrixXd::Identity(y.size(), y.size()); };
    out.freq.lipschitz_bound = 1.0;
    out.freq.domain = ParamBox{VectorXd::Constant(1, 0.15), VectorXd::Constant(1, 4.15), 0.1};
    out.freq.sup_omega = 4.15;
    out.normal.theta_t = VectorXd::Constant(1, std::atan(t));
    out.normal.t = t;
    out.ham.perturbation = twist11_perturbation().scaled(eps);
    out.scheme.B = VectorXd::Constant(1, 1.0);
    out.scheme.H1 = twist11_perturbation();
    out.scheme.M1 = 4.0;
    out.scheme.M2 = 8.0;
  } else if (preset == "twist-2-1") {
    out.freq.n = 2;
    out.freq.h = [](const VectorXd& y) { return 0.5 * y.squaredNorm() + 0.3 * y[0] * y[1]; };
    out.freq.omega = [](const VectorXd& y) {
      VectorXd w(2);
      w[0] = y[0] + 0.3 * y[1];
      w[1] = y[1] + 0.3 * y[0];
      return w;
    };
    out.freq.hess_h = [](const VectorXd&) {
      MatrixXd hh(2, 2);
      hh << 1.0, 0.3, 0.3, 1.0;
      return hh;
    };
    out.freq.lipschitz_bound = 1.3;
    // Asymmetric box so the center frequency stays away from the k1 = -k2
    // resonance line of the symmetric quadratic form.
    out.freq.domain = ParamBox{(VectorXd(2) << 0.2, 0.55).finished(),
                               (VectorXd(2) << 1.2, 1.75).finished(), 0.1};
    out.freq.sup_omega = 2.2;
    out.normal.theta_t = VectorXd::Constant(1, std::atan(0.8 * t));
    out.normal.t = t;
    out.ham.perturbation = twist21_perturbation().scaled(eps);
    out.scheme.B = VectorXd::Constant(1, 0.8);
    out.scheme.H1 = twist21_perturbation();
    out.scheme.M1 = 5.0;
    out.scheme.M2 = 10.0;
  } else if (preset == "ruessmann-degenerate-demo") {
    // omega(xi) = xi^2 on a box containing 0: the first derivative vanishes
    // there, the second is uniform, so the degeneracy index is 2.
    out.freq.n = 1;
    out.freq.h = [](const VectorXd& y) { return y[0] * y[0] * y[0] / 3.0; };
    out.freq.omega = [](const VectorXd& y) { return VectorXd::Constant(1, y[0] * y[0]); };
    out.freq.hess_h = [](const VectorXd& y) { return MatrixXd::Constant(1, 1, 2.0 * y[0]); };
    out.freq.lipschitz_bound = 1.4;
    out.freq.domain = ParamBox{VectorXd::Constant(1, -0.6), VectorXd::Constant(1, 0.6), 0.1};
    out.freq.sup_omega = 0.36;
    out.normal.theta_t = VectorXd::Constant(1, std::atan(t));
    out.normal.t = t;
    FourierField p(1, 1);
    p.set_real_mode(mode({1}, {0}, {0}, {0}), 0.5);
    out.ham.perturbation = p.scaled(eps);
    out.scheme.B = VectorXd::Constant(1, 1.0);
    out.scheme.H1 = p;
    out.scheme.M1 = 1.0;
    out.scheme.M2 = 2.0;
  } else {
    throw std::invalid_argument("standard_test_model: unknown preset " + preset);
  }
  out.ham.freq = out.freq;
  out.ham.normal = out.normal;
  out.ham.epsilon = eps;
  out.ham.t = t;
  out.ham.xi_center =
      (out.freq.n == 1) ? VectorXd::Constant(1, 0.5) : out.freq.domain.center();
  out.ham.omega_shift = VectorXd::Zero(out.freq.n);
  out.scheme.freq = out.freq;
  out.scheme.epsilon = eps;
  out.scheme.scheme_order = 2;
  return out;
}

}  // namespace kamtori
