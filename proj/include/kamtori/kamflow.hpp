#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "kamtori/homological.hpp"
#include "kamtori/sympmap.hpp"

namespace kamtori {

// Thrown when a small-divisor margin falls under its threshold.
struct ScreenFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Thrown when the iteration stops contracting.
struct ConvergenceFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct KamSchedule {
  double gamma = 0.05;
  double tau = 8.0;
  int nbar = 1;
  int L = 2;
  double s0 = 0.4;
  double r0 = 0.05;
  double stop_eps = 1e-13;
  int max_steps = 12;
  int min_steps = 0;
  int k_cap = 24;     // Fourier cutoff of the solved/truncated part
  int nx = 64;        // collocation points per angle dimension
  double eta_min = 1e-3, eta_max = 0.95;  // clamp for the radius ratio
  double sample_amp = 0.08;  // stencil amplitude for gradient sampling; kept
                             // fixed as r shrinks so the degree-4 fit stays
                             // well conditioned

  double rho0() const { return s0 / 20.0; }
  double rho(int v) const { return rho0() / std::pow(2.0, v); }
  double gamma_v(int v) const {
    const double p = double((nbar + 1) * L);
    return std::pow(gamma, p) / std::pow(2.0, p * v);
  }
  // s_{v+1} = s_v - 5 rho_v keeps s_v >= s0/2.
  double s_of(int v) const {
    double s = s0;
    for (int w = 0; w < v; ++w) s -= 5.0 * rho(w);
    return s;
  }
  double nu_bar() const { return double(nbar + 1); }
  double nu(int n) const { return tau * (nbar + 1) + nbar + n; }
};

// Per-step change of variables: the linear plane maps (lambda, beta) applied
// first, then the near-identity map generated by F_gen.
struct StepTransform {
  FourierField F_gen;
  VectorXd lambda, beta;
};

struct KamTraceEntry {
  int v = 0;
  double s_v = 0, r_v = 0, rho_v = 0, gamma_v = 0, eps_v = 0;
  double min_divisor_margin = 0, eta_v = 0;
  VectorXd omega;  // per-step frequency omega(xi) + accumulated drift / t
  VectorXd theta;  // theta^{t,v}
};

struct KamState {
  GeneratingHamiltonian ham;  // current Hamiltonian tN_v + tP_v
  KamSchedule sched;
  int v = 0;
  double s = 0, r = 0;
  double eps = 0;    // perturbation size in the units of the initial eps
  double norm0 = 0;  // weighted norm of P_0, fixes the unit conversion
  std::vector<StepTransform> transforms;
  std::vector<KamTraceEntry> trace;
  bool converged = false;

  VectorXd limit_t_omega() const { return ham.t_omega_at(VectorXd::Zero(ham.n())); }
  VectorXd limit_theta() const { return ham.normal.theta_t; }
};

struct KamStepOutcome {
  GeneratingHamiltonian next;
  StepTransform transform;
  NormalFormUpdate means;
  double min_divisor_margin = 0;
};

// One KAM step at analyticity (s, r): solve the homological equation on the
// order-2, |k| <= k_cut part, renormalize the elliptic block, then rebuild
// the conjugated generating Hamiltonian from gradient samples of the exact
// composed map and project back onto Fourier-polynomial form (degree <= 4).
KamStepOutcome kam_step(const GeneratingHamiltonian& ham, double s, double r, double gamma_v,
                        const KamSchedule& sched);

KamState run_iteration(const GeneratingHamiltonian& ham0, const KamSchedule& sched);

// Wraps a plain generating field F as a GeneratingHamiltonian with no
// integrable or elliptic part, so the twist-map machinery applies to it.
GeneratingHamiltonian generator_of(const FourierField& F);

// The per-step change of variables C_v (new coordinates to old) and the
// composed conjugation Psi = C_0 ∘ C_1 ∘ ... applied to a phase point.
PhasePoint apply_step_transform(const StepTransform& tr, const PhasePoint& z);
PhasePoint apply_step_transform_inverse(const StepTransform& tr, const PhasePoint& z);
PhasePoint apply_conjugacy(const KamState& state, const PhasePoint& z);

// Embedded torus point at parameter phi (slice yhat = u = vhat = 0).
PhasePoint evaluate_conjugacy(const KamState& state, const VectorXd& phi);

// Run manifest: inputs, schedule, per-step trace, limit frequencies.
std::string manifest_json(const KamState& state);

// Fits a Fourier-polynomial field (graded degree <= max_degree, |k|_inf <=
// k_fit) to gradient samples on the collocation set used by kam_step.
// Exposed for direct testing of the projection.
FourierField fit_field_from_gradients(
    int n, int m, int nx, int k_fit, int max_degree,
    const std::vector<VectorXd>& stencil,
    const std::vector<std::vector<VectorXd>>& grad_samples);

// The (yhat, u, vhat) stencil used by the projection, scaled to radius r.
std::vector<VectorXd> collocation_stencil(int n, int m, double r);

}  // namespace kamtori
