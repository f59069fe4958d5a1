#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "kamtori/homological.hpp"
#include "kamtori/util.hpp"

using namespace kamtori;

namespace {

// Random real field of graded degree <= 2 over T^1 with two normal planes.
FourierField random_r_field(std::mt19937& rng) {
  FourierField f(1, 2);
  std::uniform_real_distribution<double> cd(-1.0, 1.0);
  auto coef = [&] { return Complex(cd(rng), cd(rng)); };
  for (int k = 0; k <= 2; ++k) {
    auto put = [&](std::vector<int> l, std::vector<int> i, std::vector<int> j) {
      f.set_real_mode(ModeKey{{k}, std::move(l), std::move(i), std::move(j)}, coef());
    };
    put({0}, {0, 0}, {0, 0});
    put({1}, {0, 0}, {0, 0});
    put({0}, {1, 0}, {0, 0});
    put({0}, {0, 0}, {1, 0});
    put({0}, {0, 0}, {0, 1});
    put({0}, {0, 1}, {0, 0});
    put({0}, {0, 0}, {0, 0});
    put({0}, {1, 1}, {0, 0});
    put({0}, {2, 0}, {0, 0});
    put({0}, {0, 2}, {0, 0});
    put({0}, {0, 0}, {1, 1});
    put({0}, {0, 0}, {2, 0});
    put({0}, {0, 0}, {0, 2});
    put({0}, {1, 0}, {0, 1});
    put({0}, {0, 1}, {1, 0});
  }
  return f;
}

EllipticNormalData test_normal() {
  EllipticNormalData normal;
  normal.theta_t = VectorXd(2);
  normal.theta_t << 0.7, 1.1;
  normal.t = 0.1;
  return normal;
}

FourierField mean_field(const NormalFormUpdate& means, int n, int m) {
  FourierField f(n, m);
  const std::vector<int> zk(n, 0), zl(n, 0), zi(m, 0);
  f.add_term(ModeKey{zk, zl, zi, zi}, means.c000_mean);
  for (int a = 0; a < n; ++a) {
    ModeKey key{zk, zl, zi, zi};
    key.l[a] = 1;
    f.add_term(key, means.t_omega_hat[a]);
  }
  for (int j = 0; j < m; ++j) {
    ModeKey key{zk, zl, zi, zi};
    key.i[j] = 1;
    key.j[j] = 1;
    f.add_term(key, means.a_hat[j]);
    key.j[j] = 0;
    key.i[j] = 2;
    f.add_term(key, 0.5 * means.b_hat[j]);
    key.i[j] = 0;
    key.j[j] = 2;
    f.add_term(key, 0.5 * means.c_hat[j]);
  }
  return f;
}

}  // namespace

TEST_CASE("component extraction round trips") {
  std::mt19937 rng(21);
  FourierField f = random_r_field(rng);
  FourierField back = assemble_order2(extract_order2(f));
  CHECK((back - f).max_abs_coeff() < 1e-15);
  FourierField high(1, 1);
  high.add_term(ModeKey{{0}, {0}, {3}, {0}}, 1.0);
  CHECK_THROWS_AS(extract_order2(high), std::invalid_argument);
}

TEST_CASE("forward operator applied to the solution recovers the right side") {
  std::mt19937 rng(31);
  EllipticNormalData normal = test_normal();
  VectorXd t_omega = VectorXd::Constant(1, 0.5);
  for (int rep = 0; rep < 5; ++rep) {
    FourierField r = random_r_field(rng);
    HomologicalSolution sol = solve_homological(r, t_omega, normal);
    FourierField back = apply_L(sol.F, t_omega, normal) + mean_field(sol.means, 1, 2);
    CHECK((back - r).max_abs_coeff() < 1e-11);
    CHECK(sol.F.reality_defect() < 1e-12);
  }
}

TEST_CASE("normal block determinant follows the cosine identity") {
  EllipticNormalData normal = test_normal();
  const double theta = normal.theta_t[0];
  const double a = 1.0 / std::cos(theta), b = std::tan(theta);
  for (double phi : {0.0, 0.3, 2.1}) {
    const Complex e = std::polar(1.0, phi);
    MatrixXcd M(2, 2);
    M << a * e - 1.0, -b, b * e, e - a;
    const Complex expected = 2.0 * a * e * (std::cos(phi) - std::cos(theta));
    CHECK(std::abs(M.determinant() - expected) < 1e-13);
  }
}

TEST_CASE("constant parts land in the normal-form update") {
  EllipticNormalData normal = test_normal();
  VectorXd t_omega = VectorXd::Constant(1, 0.5);
  FourierField r(1, 2);
  r.add_term(ModeKey{{0}, {1}, {0, 0}, {0, 0}}, 0.25);
  r.add_term(ModeKey{{0}, {0}, {1, 1}, {0, 0}}, 0.5);  // u_0 u_1 term, removable
  r.add_term(ModeKey{{0}, {0}, {2, 0}, {0, 0}}, 0.15);
  r.add_term(ModeKey{{0}, {0}, {0, 0}, {1, 0}}, 0.1);
  HomologicalSolution sol = solve_homological(r, t_omega, normal);
  CHECK(sol.means.t_omega_hat[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(sol.means.b_hat[0] == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(sol.means.b_hat[1] == 0.0);
  // The mixed-plane quadratic mean and the linear normal mean are removable,
  // so they produce generator coefficients instead of normal-form drift.
  CHECK(sol.means.a_hat.lpNorm<Eigen::Infinity>() == 0.0);
  FourierField back = apply_L(sol.F, t_omega, normal) + mean_field(sol.means, 1, 2);
  CHECK((back - r).max_abs_coeff() < 1e-12);
}

TEST_CASE("zero update keeps the elliptic data fixed") {
  EllipticNormalData normal = test_normal();
  NormalFormUpdate means;
  means.a_hat = VectorXd::Zero(2);
  means.b_hat = VectorXd::Zero(2);
  means.c_hat = VectorXd::Zero(2);
  EllipticRenormalization ren = normalize_elliptic(normal, means);
  CHECK((ren.next.theta_t - normal.theta_t).lpNorm<Eigen::Infinity>() < 1e-13);
  CHECK((ren.lambda - VectorXd::Ones(2)).lpNorm<Eigen::Infinity>() < 1e-13);
  CHECK(ren.beta.lpNorm<Eigen::Infinity>() < 1e-13);
}

TEST_CASE("renormalization restores the sec-tan normal form") {
  EllipticNormalData normal = test_normal();
  NormalFormUpdate means;
  means.a_hat = VectorXd(2);
  means.b_hat = VectorXd(2);
  means.c_hat = VectorXd(2);
  means.a_hat << 2e-3, -1e-3;
  means.b_hat << -1.5e-3, 2.5e-3;
  means.c_hat << 0.5e-3, 1e-3;
  EllipticRenormalization ren = normalize_elliptic(normal, means);
  for (int j = 0; j < 2; ++j) {
    const double abar = 1.0 / std::cos(normal.theta_t[j]) + means.a_hat[j];
    const double bbar = std::tan(normal.theta_t[j]) + means.b_hat[j];
    const double cbar = std::tan(normal.theta_t[j]) + means.c_hat[j];
    Eigen::Matrix2d omega_bar, T, Tinv;
    omega_bar << abar - cbar * bbar / abar, cbar / abar, -bbar / abar, 1.0 / abar;
    const double lam = ren.lambda[j], beta = ren.beta[j];
    T << 1.0 / lam, -beta, 0.0, lam;
    Tinv << lam, beta, 0.0, 1.0 / lam;
    Eigen::Matrix2d M = Tinv * omega_bar * T;
    const double ap = 1.0 / std::cos(ren.next.theta_t[j]);
    const double bp = std::tan(ren.next.theta_t[j]);
    Eigen::Matrix2d expect;
    expect << ap - bp * bp / ap, bp / ap, -bp / ap, 1.0 / ap;
    CHECK((M - expect).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK(std::abs(M.determinant() - 1.0) < 1e-12);
    // Drift away from the old angle stays on the scale of the update.
    CHECK(std::abs(ren.next.theta_t[j] - normal.theta_t[j]) < 2e-2);
  }
}

TEST_CASE("renormalization matches the closed form for equal drifts") {
  // With b_hat = c_hat the conjugated block satisfies
  // a+ = lam*abar/(lam + beta*bbar) and b+ = bbar/(lam*(lam + beta*bbar)).
  EllipticNormalData normal;
  normal.theta_t = VectorXd::Constant(1, 0.6);
  NormalFormUpdate means;
  means.a_hat = VectorXd::Constant(1, 1.2e-3);
  means.b_hat = VectorXd::Constant(1, -0.8e-3);
  means.c_hat = VectorXd::Constant(1, -0.8e-3);
  EllipticRenormalization ren = normalize_elliptic(normal, means);
  const double abar = 1.0 / std::cos(0.6) + 1.2e-3;
  const double bbar = std::tan(0.6) - 0.8e-3;
  const double lam = ren.lambda[0], beta = ren.beta[0];
  const double ap = lam * abar / (lam + beta * bbar);
  const double bp = bbar / (lam * (lam + beta * bbar));
  CHECK(1.0 / std::cos(ren.next.theta_t[0]) == doctest::Approx(ap).epsilon(1e-10));
  CHECK(std::tan(ren.next.theta_t[0]) == doctest::Approx(bp).epsilon(1e-10));
}

TEST_CASE("divisor margin reports the closest resonant phase") {
  EllipticNormalData normal;
  normal.theta_t = VectorXd::Constant(1, 0.3);
  VectorXd t_omega = VectorXd::Constant(1, 0.28);
  // k = 1: phi = 0.28; closest to theta = 0.3 at distance 0.02.
  double margin = min_divisor_margin({{1}}, t_omega, normal);
  CHECK(margin == doctest::Approx(0.02).epsilon(1e-10));
  // k = 0 skips the zero phase, leaving distance theta.
  margin = min_divisor_margin({{0}}, t_omega, normal);
  CHECK(margin == doctest::Approx(0.3).epsilon(1e-12));
}
