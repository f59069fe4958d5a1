#pragma once

#include <string>
#include <vector>

#include "kamtori/kamflow.hpp"

namespace kamtori {

struct RotationEstimate {
  VectorXd rotation;       // average lifted-angle increment per step
  double error_estimate;   // disagreement between the two half-sample averages
};

// Weighted Birkhoff average of the angle increments of a lifted orbit, with
// an exponential bump window. Requires at least 10^3 points.
RotationEstimate rotation_vector(const std::vector<VectorXd>& lifted_angles);
RotationEstimate rotation_vector(const Orbit& orbit);

// Max over n_phi torus samples of |F(Psi(phi)) - Psi(phi + t_omega)| in the
// component sup norm, angles compared on the universal cover. t_omega
// defaults to the converged limit frequency of the state.
double invariance_residual(const KamState& state, const GeneratingHamiltonian& ham, int n_phi);
double invariance_residual(const KamState& state, const GeneratingHamiltonian& ham, int n_phi,
                           const VectorXd& t_omega);

// Generating-Hamiltonian representation of one implicit midpoint step of the
// scheme at parameter xi: the elliptic angles follow the midpoint Cayley
// rotation 2 atan(B t / 2) and the perturbation field is fitted from
// gradient samples of the scheme map, so the twist-map machinery and the
// KAM iteration apply to the scheme verbatim.
GeneratingHamiltonian scheme_generating_model(const SchemeModel& scheme, const VectorXd& xi,
                                              double t, const KamSchedule& sched);

struct TwoStepComparison {
  std::vector<double> t;                // ladder
  std::vector<VectorXd> omega;          // per-unit-time limit frequency at each t
  std::vector<double> omega_diff;       // |omega(t_i) - omega(t_{i+1})|
  std::vector<double> step_gap;         // t_i^{s/2} - t_{i+1}^{s/2}
  std::vector<double> ratio;            // omega_diff / step_gap
};

// Runs the KAM pipeline on the scheme at every step size of the ladder and
// compares the limit frequencies of consecutive pairs.
TwoStepComparison scheme_two_step_compare(const SchemeModel& scheme, const VectorXd& xi,
                                          const std::vector<double>& t_ladder,
                                          const KamSchedule& sched);

struct SurvivalRow {
  double eps = 0.0, t = 0.0;
  double screen_pass = 0.0, converged = 0.0, residual_ok = 0.0, fraction = 0.0;
};

struct SurvivalParams {
  int n_xi = 8;            // parameter samples per cell, margin-shrunk box
  double gamma = 0.05;
  double residual_tol = 1e-8;
  int k_max = 8;
};

// For each (eps, t) cell: fractions of parameter samples that pass the
// divisor screen, converge under the iteration, and verify invariance.
std::vector<SurvivalRow> survival_sweep(const std::string& preset,
                                        const std::vector<double>& eps_grid,
                                        const std::vector<double>& t_grid,
                                        const SurvivalParams& params, const KamSchedule& sched);

std::string survival_csv(const std::vector<SurvivalRow>& rows);

}  // namespace kamtori
