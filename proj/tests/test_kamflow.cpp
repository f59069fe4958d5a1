#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "kamtori/kamflow.hpp"
#include "kamtori/util.hpp"

using namespace kamtori;

namespace {

FourierField random_low_field(int n, int m, int k_max, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  FourierField f(n, m);
  std::vector<std::array<int, 3>> shapes;
  for (int l = 0; l <= 2; ++l)
    for (int i = 0; i + 2 * l <= 4; ++i)
      for (int j = 0; i + j + 2 * l <= 4; ++j) shapes.push_back({l, i, j});
  for (int k = -k_max; k <= k_max; ++k)
    for (auto [l, i, j] : shapes) {
      ModeKey key;
      key.k = {k};
      key.l = {l};
      key.i = {i};
      key.j = {j};
      f.set_real_mode(key, Complex(unif(rng), unif(rng)));
    }
  return f;
}

}  // namespace

TEST_CASE("gradient projection recovers a degree-4 field exactly") {
  const int n = 1, m = 1, nx = 32, k_fit = 3;
  std::mt19937_64 rng(7);
  FourierField truth = random_low_field(n, m, k_fit, rng);

  const std::vector<VectorXd> stencil = collocation_stencil(n, m, 0.08);
  std::vector<std::vector<VectorXd>> samples(nx, std::vector<VectorXd>(int(stencil.size())));
  for (int xi = 0; xi < nx; ++xi) {
    VectorXd x = VectorXd::Constant(1, two_pi * xi / nx);
    for (size_t w = 0; w < stencil.size(); ++w) {
      const VectorXd& st = stencil[w];
      Jet2 jet = truth.jet(x, st.segment(n, m), st.segment(0, n), st.segment(n + m, m));
      samples[xi][w] = jet.grad;
    }
  }
  FourierField fitted = fit_field_from_gradients(n, m, nx, k_fit, 4, stencil, samples);

  // Constants are unobservable from gradients; compare gradients instead.
  std::uniform_real_distribution<double> unif(-0.05, 0.05);
  for (int trial = 0; trial < 10; ++trial) {
    VectorXd x = VectorXd::Constant(1, two_pi * unif(rng) * 10.0);
    VectorXd u = VectorXd::Constant(1, unif(rng));
    VectorXd y = VectorXd::Constant(1, unif(rng) * 0.05);
    VectorXd v = VectorXd::Constant(1, unif(rng));
    Jet2 a = truth.jet(x, u, y, v), b = fitted.jet(x, u, y, v);
    CHECK((a.grad - b.grad).lpNorm<Eigen::Infinity>() < 1e-10);
  }
}

TEST_CASE("zero perturbation converges immediately with identity conjugacy") {
  ModelPreset model = standard_test_model("twist-1-1", 0.0, 0.1);
  KamSchedule sched;
  KamState st = run_iteration(model.ham, sched);
  CHECK(st.converged);
  CHECK(st.eps == 0.0);
  CHECK(st.transforms.empty());
  VectorXd phi = VectorXd::Constant(1, 1.234);
  PhasePoint z = evaluate_conjugacy(st, phi);
  CHECK(std::abs(z.x[0] - 1.234) < 1e-15);
  CHECK(std::abs(z.u[0]) < 1e-15);
  CHECK(std::abs(z.y[0]) < 1e-15);
  CHECK(std::abs(z.v[0]) < 1e-15);
}

TEST_CASE("step transform inverse round trip") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  StepTransform tr;
  tr.F_gen = random_low_field(1, 1, 2, rng).scaled(1e-4);
  tr.lambda = VectorXd::Constant(1, 1.02);
  tr.beta = VectorXd::Constant(1, -0.03);
  for (int trial = 0; trial < 5; ++trial) {
    PhasePoint z;
    z.x = VectorXd::Constant(1, wrap_angle(3.0 * unif(rng)));
    z.u = VectorXd::Constant(1, 0.05 * unif(rng));
    z.y = VectorXd::Constant(1, 0.01 * unif(rng));
    z.v = VectorXd::Constant(1, 0.05 * unif(rng));
    PhasePoint w = apply_step_transform_inverse(tr, apply_step_transform(tr, z));
    CHECK(std::abs(w.x[0] - z.x[0]) < 1e-11);
    CHECK(std::abs(w.u[0] - z.u[0]) < 1e-11);
    CHECK(std::abs(w.y[0] - z.y[0]) < 1e-11);
    CHECK(std::abs(w.v[0] - z.v[0]) < 1e-11);
  }
}

TEST_CASE("iteration contracts to the stopping threshold on the twist preset") {
  ModelPreset model = standard_test_model("twist-1-1", 1e-6, 0.1);
  KamSchedule sched;
  KamState st = run_iteration(model.ham, sched);
  CHECK(st.converged);
  CHECK(st.eps <= sched.stop_eps);
  CHECK(int(st.trace.size()) >= 3);
  for (size_t v = 1; v < st.trace.size(); ++v) CHECK(st.trace[v].eps_v < st.trace[v - 1].eps_v);
  for (const auto& te : st.trace) {
    CHECK(te.eta_v > 0.0);
    CHECK(te.eta_v <= sched.eta_max);
    CHECK(te.s_v >= sched.s0 / 2.0 - 1e-12);
  }
  // Limit frequency stays within O(eps0) of the unperturbed one.
  CHECK(std::abs(st.limit_t_omega()[0] / model.ham.t - 0.5) < 3e-6);
  CHECK(std::abs(st.limit_theta()[0] - std::atan(0.1)) < 3e-6);
}

TEST_CASE("converged conjugacy parametrizes an invariant torus") {
  ModelPreset model = standard_test_model("twist-1-1", 1e-6, 0.1);
  KamSchedule sched;
  KamState st = run_iteration(model.ham, sched);
  REQUIRE(st.converged);
  const VectorXd tw = st.limit_t_omega();
  double worst = 0.0;
  for (int i = 0; i < 32; ++i) {
    VectorXd phi = VectorXd::Constant(1, two_pi * i / 32.0);
    PhasePoint img = apply_twist_map(model.ham, evaluate_conjugacy(st, phi));
    PhasePoint ref = evaluate_conjugacy(st, phi + tw);
    worst = std::max(worst, std::abs(wrap_angle(img.x[0] - ref.x[0] + M_PI) - M_PI));
    worst = std::max(worst, std::abs(img.u[0] - ref.u[0]));
    worst = std::max(worst, std::abs(img.y[0] - ref.y[0]));
    worst = std::max(worst, std::abs(img.v[0] - ref.v[0]));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("screen failure on a resonant frequency") {
  ModelPreset model = standard_test_model("twist-1-1", 1e-6, 0.1);
  // Shift the frequency so t*omega sits on top of theta^t: the |<k, t
  // omega> - theta_j| condition at |k| = 1 then has zero margin.
  model.ham.omega_shift = VectorXd::Constant(1, std::atan(0.1) - 0.05);
  KamSchedule sched;
  CHECK_THROWS_AS(run_iteration(model.ham, sched), ScreenFailure);
}

TEST_CASE("manifest captures schedule and trace") {
  ModelPreset model = standard_test_model("twist-1-1", 1e-6, 0.1);
  KamSchedule sched;
  sched.max_steps = 2;
  sched.min_steps = 2;
  sched.stop_eps = 1e-30;
  KamState st;
  try {
    st = run_iteration(model.ham, sched);
  } catch (const ConvergenceFailure&) {
  }
  std::string text = manifest_json(st);
  CHECK(text.find("\"gamma\"") != std::string::npos);
  CHECK(text.find("\"trace\"") != std::string::npos);
  CHECK(text.find("\"eps_v\"") != std::string::npos);
  CHECK(text.find("\"omega\"") != std::string::npos);
}

TEST_CASE("schedule invariants") {
  KamSchedule sched;
  CHECK(sched.rho(0) == doctest::Approx(sched.s0 / 20.0));
  CHECK(sched.rho(3) == doctest::Approx(sched.s0 / 160.0));
  // s_v decreases to s0/2 in the limit.
  CHECK(sched.s_of(30) > sched.s0 / 2.0 - 1e-9);
  CHECK(sched.s_of(1) == doctest::Approx(sched.s0 - 5.0 * sched.rho0()));
  CHECK(sched.gamma_v(1) == doctest::Approx(sched.gamma_v(0) / 16.0));
  CHECK(sched.nu(1) == doctest::Approx(18.0));
  CHECK(sched.nu_bar() == doctest::Approx(2.0));
}
