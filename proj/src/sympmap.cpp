#include "kamtori/sympmap.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "kamtori/util.hpp"

namespace kamtori {

VectorXd PhasePoint::packed() const {
  VectorXd z(dim());
  z << x, u, y, v;
  return z;
}

PhasePoint PhasePoint::unpack(const VectorXd& z, int n, int m) {
  PhasePoint p;
  p.x = z.segment(0, n);
  p.u = z.segment(n, m);
  p.y = z.segment(n + m, n);
  p.v = z.segment(n + m + n, m);
  return p;
}

namespace {

struct BlockIndex {
  int n, m;
  int X() const { return 0; }
  int U() const { return n; }
  int Y() const { return n + m; }
  int V() const { return 2 * n + m; }
};

// Solves the generating relations for (ynew, vnew) given (x, u, y, v).
// Returns the jet of tH at (x, u, ynew, vnew) alongside the solution.
std::pair<VectorXd, Jet2> solve_hat_vars(const GeneratingHamiltonian& ham, const PhasePoint& p,
                                         const NewtonOptions& opt) {
  const int n = ham.n(), m = ham.m();
  const BlockIndex b{n, m};
  VectorXd w(n + m);
  w << p.y, p.v;  // O(eps) from the fixed point, a good start
  for (int it = 0; it < opt.max_iter; ++it) {
    Jet2 jet = ham.jet(p.x, p.u, w.head(n), w.tail(m));
    VectorXd g(n + m);
    g.head(n) = w.head(n) + jet.grad.segment(b.X(), n) - p.y;
    g.tail(m) = w.tail(m) + jet.grad.segment(b.U(), m) - p.v;
    if (g.lpNorm<Eigen::Infinity>() < opt.tol) return {w, jet};
    MatrixXd jac(n + m, n + m);
    jac.topLeftCorner(n, n) = MatrixXd::Identity(n, n) + jet.hess.block(b.X(), b.Y(), n, n);
    jac.topRightCorner(n, m) = jet.hess.block(b.X(), b.V(), n, m);
    jac.bottomLeftCorner(m, n) = jet.hess.block(b.U(), b.Y(), m, n);
    jac.bottomRightCorner(m, m) =
        MatrixXd::Identity(m, m) + jet.hess.block(b.U(), b.V(), m, m);
    w -= jac.partialPivLu().solve(g);
  }
  throw std::runtime_error("apply_twist_map: Newton did not converge");
}

}  // namespace

PhasePoint apply_twist_map(const GeneratingHamiltonian& ham, const PhasePoint& p,
                           const NewtonOptions& opt) {
  const int n = ham.n(), m = ham.m();
  const BlockIndex b{n, m};
  auto [w, jet] = solve_hat_vars(ham, p, opt);
  PhasePoint out;
  out.y = w.head(n);
  out.v = w.tail(m);
  out.x = p.x + jet.grad.segment(b.Y(), n);
  out.u = p.u + jet.grad.segment(b.V(), m);
  return out;
}

PhasePoint apply_twist_map_inverse(const GeneratingHamiltonian& ham, const PhasePoint& p,
                                   const NewtonOptions& opt) {
  const int n = ham.n(), m = ham.m();
  const BlockIndex b{n, m};
  // Unknowns (x, u) of the preimage; tH is evaluated at (x, u, p.y, p.v).
  VectorXd w(n + m);
  w << p.x, p.u;
  for (int it = 0; it < opt.max_iter; ++it) {
    Jet2 jet = ham.jet(w.head(n), w.tail(m), p.y, p.v);
    VectorXd g(n + m);
    g.head(n) = w.head(n) + jet.grad.segment(b.Y(), n) - p.x;
    g.tail(m) = w.tail(m) + jet.grad.segment(b.V(), m) - p.u;
    if (g.lpNorm<Eigen::Infinity>() < opt.tol) {
      PhasePoint out;
      out.x = w.head(n);
      out.u = w.tail(m);
      out.y = p.y + jet.grad.segment(b.X(), n);
      out.v = p.v + jet.grad.segment(b.U(), m);
      return out;
    }
    MatrixXd jac(n + m, n + m);
    jac.topLeftCorner(n, n) = MatrixXd::Identity(n, n) + jet.hess.block(b.Y(), b.X(), n, n);
    jac.topRightCorner(n, m) = jet.hess.block(b.Y(), b.U(), n, m);
    jac.bottomLeftCorner(m, n) = jet.hess.block(b.V(), b.X(), m, n);
    jac.bottomRightCorner(m, m) =
        MatrixXd::Identity(m, m) + jet.hess.block(b.V(), b.U(), m, m);
    w -= jac.partialPivLu().solve(g);
  }
  throw std::runtime_error("apply_twist_map_inverse: Newton did not converge");
}

MatrixXd twist_map_jacobian(const GeneratingHamiltonian& ham, const PhasePoint& p,
                            const NewtonOptions& opt) {
  const int n = ham.n(), m = ham.m();
  const BlockIndex b{n, m};
  auto [w, jet] = solve_hat_vars(ham, p, opt);
  const MatrixXd& H = jet.hess;

  // d(ynew, vnew)/d(x, u, y, v) from the implicit relations.
  MatrixXd A(n + m, n + m), rhs(n + m, 2 * (n + m));
  A.topLeftCorner(n, n) = MatrixXd::Identity(n, n) + H.block(b.X(), b.Y(), n, n);
  A.topRightCorner(n, m) = H.block(b.X(), b.V(), n, m);
  A.bottomLeftCorner(m, n) = H.block(b.U(), b.Y(), m, n);
  A.bottomRightCorner(m, m) = MatrixXd::Identity(m, m) + H.block(b.U(), b.V(), m, m);
  rhs.setZero();
  rhs.block(0, 0, n, n) = -H.block(b.X(), b.X(), n, n);
  rhs.block(0, n, n, m) = -H.block(b.X(), b.U(), n, m);
  rhs.block(0, n + m, n, n) = MatrixXd::Identity(n, n);
  rhs.block(n, 0, m, n) = -H.block(b.U(), b.X(), m, n);
  rhs.block(n, n, m, m) = -H.block(b.U(), b.U(), m, m);
  rhs.block(n, 2 * n + m, m, m) = MatrixXd::Identity(m, m);
  MatrixXd dW = A.partialPivLu().solve(rhs);

  MatrixXd jac(2 * (n + m), 2 * (n + m));
  // Chain rule through tH(x, u, ynew(.), vnew(.)) for xnew and unew.
  MatrixXd dxnew = MatrixXd::Zero(n, 2 * (n + m));
  dxnew.block(0, 0, n, n) = MatrixXd::Identity(n, n) + H.block(b.Y(), b.X(), n, n);
  dxnew.block(0, n, n, m) = H.block(b.Y(), b.U(), n, m);
  dxnew += H.block(b.Y(), b.Y(), n, n) * dW.topRows(n) +
           H.block(b.Y(), b.V(), n, m) * dW.bottomRows(m);
  MatrixXd dunew = MatrixXd::Zero(m, 2 * (n + m));
  dunew.block(0, n, m, m) = MatrixXd::Identity(m, m) + H.block(b.V(), b.U(), m, m);
  dunew.block(0, 0, m, n) = H.block(b.V(), b.X(), m, n);
  dunew += H.block(b.V(), b.Y(), m, n) * dW.topRows(n) +
           H.block(b.V(), b.V(), m, m) * dW.bottomRows(m);

  jac.topRows(n) = dxnew;
  jac.middleRows(n, m) = dunew;
  jac.middleRows(n + m, n) = dW.topRows(n);
  jac.bottomRows(m) = dW.bottomRows(m);
  return jac;
}

double symplecticity_defect(const MatrixXd& jac) {
  const int d = int(jac.rows()), half = d / 2;
  MatrixXd S = MatrixXd::Zero(d, d);
  S.topRightCorner(half, half) = MatrixXd::Identity(half, half);
  S.bottomLeftCorner(half, half) = -MatrixXd::Identity(half, half);
  return (jac.transpose() * S * jac - S).lpNorm<Eigen::Infinity>();
}

namespace {

VectorXd hamiltonian_vector_field(const SchemeModel& scheme, const VectorXd& z) {
  const int n = scheme.n(), m = scheme.m(), half = n + m;
  PhasePoint p = PhasePoint::unpack(z, n, m);
  Jet2 jet = scheme.jet(p.x, p.u, p.y, p.v);
  VectorXd f(2 * half);
  f.head(half) = jet.grad.tail(half);   // q' = dH/dp
  f.tail(half) = -jet.grad.head(half);  // p' = -dH/dq
  return f;
}

}  // namespace

PhasePoint apply_scheme_step(const SchemeModel& scheme, const PhasePoint& p, double t,
                             const NewtonOptions& opt) {
  const int n = scheme.n(), m = scheme.m(), half = n + m, d = 2 * half;
  const VectorXd z0 = p.packed();
  VectorXd z1 = z0;
  for (int it = 0; it < opt.max_iter; ++it) {
    const VectorXd zm = 0.5 * (z0 + z1);
    PhasePoint pm = PhasePoint::unpack(zm, n, m);
    Jet2 jet = scheme.jet(pm.x, pm.u, pm.y, pm.v);
    VectorXd f(d);
    f.head(half) = jet.grad.tail(half);
    f.tail(half) = -jet.grad.head(half);
    VectorXd g = z1 - z0 - t * f;
    if (g.lpNorm<Eigen::Infinity>() < opt.tol) return PhasePoint::unpack(z1, n, m);
    MatrixXd jf(d, d);
    jf.topRows(half) = jet.hess.bottomRows(half);
    jf.bottomRows(half) = -jet.hess.topRows(half);
    MatrixXd jac = MatrixXd::Identity(d, d) - 0.5 * t * jf;
    z1 -= jac.partialPivLu().solve(g);
  }
  throw std::runtime_error("apply_scheme_step: Newton did not converge");
}

PhasePoint reference_flow(const SchemeModel& scheme, const PhasePoint& p, double t,
                          int substeps) {
  // Cooper-Verner 11-stage order-8 scheme.
  static const double sq = std::sqrt(21.0);
  const int ns = 11;
  double a[11][11] = {};
  a[1][0] = 0.5;
  a[2][0] = 0.25;
  a[2][1] = 0.25;
  a[3][0] = 1.0 / 7.0;
  a[3][1] = (-7.0 - 3.0 * sq) / 98.0;
  a[3][2] = (21.0 + 5.0 * sq) / 49.0;
  a[4][0] = (11.0 + sq) / 84.0;
  a[4][2] = (18.0 + 4.0 * sq) / 63.0;
  a[4][3] = (21.0 - sq) / 252.0;
  a[5][0] = (5.0 + sq) / 48.0;
  a[5][2] = (9.0 + sq) / 36.0;
  a[5][3] = (-231.0 + 14.0 * sq) / 360.0;
  a[5][4] = (63.0 - 7.0 * sq) / 80.0;
  a[6][0] = (10.0 - sq) / 42.0;
  a[6][2] = (-432.0 + 92.0 * sq) / 315.0;
  a[6][3] = (633.0 - 145.0 * sq) / 90.0;
  a[6][4] = (-504.0 + 115.0 * sq) / 70.0;
  a[6][5] = (63.0 - 13.0 * sq) / 35.0;
  a[7][0] = 1.0 / 14.0;
  a[7][4] = (14.0 - 3.0 * sq) / 126.0;
  a[7][5] = (13.0 - 3.0 * sq) / 63.0;
  a[7][6] = 1.0 / 9.0;
  a[8][0] = 1.0 / 32.0;
  a[8][4] = (91.0 - 21.0 * sq) / 576.0;
  a[8][5] = 11.0 / 72.0;
  a[8][6] = (-385.0 - 75.0 * sq) / 1152.0;
  a[8][7] = (63.0 + 13.0 * sq) / 128.0;
  a[9][0] = 1.0 / 14.0;
  a[9][4] = 1.0 / 9.0;
  a[9][5] = (-733.0 - 147.0 * sq) / 2205.0;
  a[9][6] = (515.0 + 111.0 * sq) / 504.0;
  a[9][7] = (-51.0 - 11.0 * sq) / 56.0;
  a[9][8] = (132.0 + 28.0 * sq) / 245.0;
  a[10][4] = (-42.0 + 7.0 * sq) / 18.0;
  a[10][5] = (-18.0 + 28.0 * sq) / 45.0;
  a[10][6] = (-273.0 - 53.0 * sq) / 72.0;
  a[10][7] = (301.0 + 53.0 * sq) / 72.0;
  a[10][8] = (28.0 - 28.0 * sq) / 45.0;
  a[10][9] = (49.0 - 7.0 * sq) / 18.0;
  const double bw[11] = {1.0 / 20.0, 0, 0, 0, 0, 0, 0, 49.0 / 180.0, 16.0 / 45.0,
                         49.0 / 180.0, 1.0 / 20.0};

  const int n = scheme.n(), m = scheme.m(), d = 2 * (n + m);
  VectorXd z = p.packed();
  const double h = t / substeps;
  std::vector<VectorXd> k(ns);
  for (int step = 0; step < substeps; ++step) {
    for (int s = 0; s < ns; ++s) {
      VectorXd zs = z;
      for (int q = 0; q < s; ++q)
        if (a[s][q] != 0.0) zs += h * a[s][q] * k[q];
      k[s] = hamiltonian_vector_field(scheme, zs);
    }
    VectorXd dz = VectorXd::Zero(d);
    for (int s = 0; s < ns; ++s)
      if (bw[s] != 0.0) dz += bw[s] * k[s];
    z += h * dz;
  }
  return PhasePoint::unpack(z, n, m);
}

Orbit iterate_twist_map(const GeneratingHamiltonian& ham, const PhasePoint& start, int steps,
                        const NewtonOptions& opt) {
  Orbit orbit;
  orbit.n = ham.n();
  orbit.m = ham.m();
  orbit.points.reserve(steps + 1);
  orbit.points.push_back(start);
  PhasePoint p = start;
  for (int s = 0; s < steps; ++s) {
    p = apply_twist_map(ham, p, opt);
    orbit.points.push_back(p);
  }
  return orbit;
}

std::string Orbit::to_csv() const {
  std::string out = "step";
  char buf[64];
  for (int a = 0; a < n; ++a) out += ",x" + std::to_string(a);
  for (int a = 0; a < m; ++a) out += ",u" + std::to_string(a);
  for (int a = 0; a < n; ++a) out += ",y" + std::to_string(a);
  for (int a = 0; a < m; ++a) out += ",v" + std::to_string(a);
  for (int a = 0; a < n; ++a) out += ",lifted_x" + std::to_string(a);
  out += "\n";
  auto emit = [&](double val) {
    std::snprintf(buf, sizeof(buf), ",%.17g", val);
    out += buf;
  };
  for (std::size_t s = 0; s < points.size(); ++s) {
    out += std::to_string(s);
    const PhasePoint& p = points[s];
    for (int a = 0; a < n; ++a) emit(wrap_angle(p.x[a]));
    for (int a = 0; a < m; ++a) emit(p.u[a]);
    for (int a = 0; a < n; ++a) emit(p.y[a]);
    for (int a = 0; a < m; ++a) emit(p.v[a]);
    for (int a = 0; a < n; ++a) emit(p.x[a]);
    out += "\n";
  }
  return out;
}

}  // namespace kamtori
