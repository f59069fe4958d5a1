#pragma once

#include <map>
#include <vector>

#include "kamtori/model.hpp"

namespace kamtori {

using VectorXcd = Eigen::VectorXcd;
using MatrixXcd = Eigen::MatrixXcd;

// Per-Fourier-mode coefficients of a field of graded degree <= 2:
//   c000 + <c100, yhat> + <c010, u> + <c001, vhat>
//        + u^T c011 vhat + (1/2) u^T c020 u + (1/2) vhat^T c002 vhat.
// c020 and c002 are kept symmetric.
struct Order2Mode {
  Complex c000{0.0, 0.0};
  VectorXcd c100, c010, c001;
  MatrixXcd c011, c020, c002;
};

struct Order2Components {
  int n = 0, m = 0;
  std::map<std::vector<int>, Order2Mode> modes;
};

// Splits a degree <= 2 field into per-mode component blocks. Throws if the
// field carries higher-degree monomials.
Order2Components extract_order2(const FourierField& field);
FourierField assemble_order2(const Order2Components& comps);

// Constant parts that the homological equation cannot remove: they are
// absorbed into the normal form instead.
struct NormalFormUpdate {
  double c000_mean = 0.0;
  VectorXd t_omega_hat;      // mean of the action-linear block
  VectorXd a_hat, b_hat, c_hat;  // diagonal means of the quadratic blocks

  double max_abs() const;
};

struct HomologicalSolution {
  FourierField F;
  NormalFormUpdate means;
  double min_divisor_margin = 0.0;
};

// Solves L F = R - Nhat mode by mode, where R has graded degree <= 2 and
// t_omega is the angle advance at the expansion point. The scalar and
// action-linear blocks invert e^{i<k,t_omega>} - 1; the normal blocks invert
// 2x2, 3x3 and 4x4 systems built from sec/tan of theta^t.
HomologicalSolution solve_homological(const FourierField& R, const VectorXd& t_omega,
                                      const EllipticNormalData& normal);

// Forward operator in function form, assembled from angle shifts of the
// component fields. Used as an independent cross-check of the mode solves.
FourierField apply_L(const FourierField& F, const VectorXd& t_omega,
                     const EllipticNormalData& normal);

// Linear change per normal plane, u = u_new/lambda - beta*v_new,
// v = lambda*v_new, restoring the sec/tan normal form after the means
// (a_hat, b_hat, c_hat) have been absorbed.
struct EllipticRenormalization {
  EllipticNormalData next;   // new theta^t
  VectorXd lambda, beta;     // per-plane map parameters
};

EllipticRenormalization normalize_elliptic(const EllipticNormalData& normal,
                                           const NormalFormUpdate& means);

// min over the k-support of R of the distances from <k, t_omega> to the
// resonant phases {0, +-theta_j, +-(theta_i + theta_j), +-(theta_i - theta_j)}
// modulo 2*pi (the zero phase is skipped at k = 0).
double min_divisor_margin(const std::vector<std::vector<int>>& k_support,
                          const VectorXd& t_omega, const EllipticNormalData& normal);

}  // namespace kamtori
