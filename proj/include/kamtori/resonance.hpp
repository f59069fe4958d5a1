#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kamtori/model.hpp"

namespace kamtori {

// Thrown when the frequency map fails the nondegeneracy rank condition.
struct RankFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One small-divisor condition margin below threshold. condition is 1 for the
// pure rotation divisor, 2 for single elliptic shifts theta_j, 3 for sums
// theta_i + theta_j, 4 for differences theta_i - theta_j (i < j).
struct ResonanceViolation {
  std::vector<int> k;
  long l = 0;
  int i = -1, j = -1;
  int condition = 0;
  double margin = 0.0;
};

struct ResonanceReport {
  VectorXd xi;
  std::vector<ResonanceViolation> violations;
  bool passed = true;
  long margins_checked = 0;
  double min_margin = 0.0;  // over all checked conditions, relative to threshold
};

struct ScreenParams {
  double gamma_v = 1e-3;
  double tau = 8.0;
  double t = 0.1;
  int k_max = 10;
  double K_hat = 2.0;        // integer window |l| <= ceil(|k| K_hat), condition 1
  double K_hat_prime = 2.0;  // same for conditions 2-4
};

// Window constants for the integer part l of the divisor conditions:
// K_hat = |omega|_V + c eps + 1, and K_hat_prime adds max_j 3|B_j|.
double khat(const FrequencyMap& freq, double drift_c, double eps);
double khat_prime(const FrequencyMap& freq, const VectorXd& B, double drift_c, double eps);

// Checks the four divisor condition families at one parameter sample.
ResonanceReport screen_small_divisors(const VectorXd& t_omega, const VectorXd& theta_t,
                                      const VectorXd& xi, const ScreenParams& p);

struct RuessmannData {
  int nbar = 0;
  double beta_amount = 0.0;
  std::vector<VectorXd> grid;
  std::vector<std::vector<int>> probes;  // integer vectors used to certify
};

// Smallest nbar <= nbar_max such that some xi-derivative of <k, omega(xi)> of
// order <= nbar is bounded away from zero, uniformly over the box and over
// probe directions k; beta_amount is the certified uniform bound per |k|.
RuessmannData russmann_index_amount(const FrequencyMap& freq, int nbar_max,
                                    std::uint64_t seed = 42);

struct MeasureEstimate {
  double volume = 0.0;            // |V|
  double measure_estimate = 0.0;  // grid-cell estimate of the excluded set
  double fraction = 0.0;
  long cells = 0, excluded_cells = 0;
  std::array<long, 4> by_condition{};  // cells first violated per family
  double mc_fraction = 0.0, ci_low = 0.0, ci_high = 0.0;
  long mc_samples = 0;
};

struct MeasureParams {
  double gamma = 1e-2;
  double t = 0.1;
  double tau = 8.0;
  int k_max = 6;
  int v_max = 4;  // union over the proportional schedule gamma_v = gamma / 2^v
  int grid_res = 2048;
  long mc_samples = 4096;
  std::uint64_t seed = 42;
  bool parallel = true;
};

// Measure of the parameter set excluded by the divisor screen, by grid cell
// count plus a Monte-Carlo cross-check with a 95% Wilson interval.
MeasureEstimate excluded_measure(const FrequencyMap& freq, const VectorXd& B,
                                 const MeasureParams& p);

// Brute-force measure of {x in I : |g(x)| < h} by bisection on the level
// crossings, with the m-th derivative certified >= d_floor on a fine grid.
// Throws if the derivative floor fails or the analytic sublevel bound
// 2 (m! h / d_floor)^{1/m} is violated.
double sublevel_measure(const std::function<double(double)>& g, double a, double b,
                        double h, int m_order, double d_floor);

// Fraction of a parameter grid where the scalar divisor entry
// M = <k, t omega(xi)> - theta + P_t(xi) has |M^{-1}| > |k|^tau / (t alpha).
double lemma52_matrix_screen(const FrequencyMap& freq, const std::vector<int>& k,
                             double theta, const std::function<double(const VectorXd&)>& P_t,
                             double alpha, double tau, double t, int grid_res);

}  // namespace kamtori
