#pragma once

#include <functional>
#include <string>

#include "kamtori/fourier.hpp"

namespace kamtori {

// Axis-aligned parameter box V in R^n with analyticity margin r.
struct ParamBox {
  VectorXd lo;
  VectorXd hi;
  double margin = 0.1;

  int dim() const { return int(lo.size()); }
  double volume() const {
    double v = 1.0;
    for (int a = 0; a < dim(); ++a) v *= hi[a] - lo[a];
    return v;
  }
  VectorXd center() const { return 0.5 * (lo + hi); }
};

// Integrable part h with its gradient map omega = h' and Lipschitz bound.
struct FrequencyMap {
  int n = 1;
  std::function<double(const VectorXd&)> h;
  std::function<VectorXd(const VectorXd&)> omega;
  std::function<MatrixXd(const VectorXd&)> hess_h;  // omega' = h''
  double lipschitz_bound = 1.0;                     // Theta
  ParamBox domain;
  double sup_omega = 1.0;  // |omega|_V, used by the l-window bounds
};

// Elliptic angles theta^t; sec/tan blocks are always derived so the
// structural identity sec^2 - tan^2 = 1 cannot drift.
struct EllipticNormalData {
  VectorXd theta_t;  // size m
  double t = 0.0;

  int m() const { return int(theta_t.size()); }
  VectorXd sec() const { return theta_t.array().cos().inverse().matrix(); }
  VectorXd tan() const { return theta_t.array().tan().matrix(); }

  // Non-resonance margin of Eq-(6)-type conditions: distance of theta_j and
  // theta_j +- theta_i from 2*pi*Z (excluding the trivially-zero case).
  double nonresonance_margin() const;
};

struct GeneratingHamiltonian {
  FrequencyMap freq;
  EllipticNormalData normal;
  FourierField perturbation;  // P, graded in (yhat - xi, u, vhat)
  double epsilon = 0.0;       // sup-norm scale of P
  double t = 0.0;
  VectorXd xi_center;  // expansion point; yhat is measured relative to it
  // Extra linear action term <omega_shift, yhat>, already carrying the step
  // size t: accumulates the frequency corrections of later KAM steps.
  VectorXd omega_shift;

  int n() const { return freq.n; }
  int m() const { return normal.m(); }

  // Value/gradient/Hessian of tH = tN + tP at a mixed-variable point, in the
  // layout (x, u, yhat, vhat) with yhat relative to xi_center.
  Jet2 jet(const VectorXd& x, const VectorXd& u, const VectorXd& yhat,
           const VectorXd& vhat) const;

  // t*omega(xi + yhat) + omega_shift: the angle advance per map application.
  VectorXd t_omega_at(const VectorXd& yhat) const;
};

// Hamiltonian H_eps = H0 + eps*H1 for the difference scheme, with H0 the
// quadratic-normal-form part built on the same h, A, B, C data.
struct SchemeModel {
  FrequencyMap freq;
  VectorXd B;          // diagonal of the elliptic block (theta^t = arctan(t B))
  FourierField H1;     // perturbation, evaluated at absolute (x, u, y, v)
  double epsilon = 0.0;
  int scheme_order = 2;  // s: implicit midpoint
  double M1 = 1.0;       // sup bound of H1
  double M2 = 1.0;       // remainder bound for P1 derivatives

  int n() const { return freq.n; }
  int m() const { return int(B.size()); }

  // H0 = h(y) + (1/2) sum_j B_j (u_j^2 + v_j^2).
  double H0(const VectorXd& u, const VectorXd& y, const VectorXd& v) const;
  // Full H_eps = H0 + eps H1 jet in the layout (x, u, y, v).
  Jet2 jet(const VectorXd& x, const VectorXd& u, const VectorXd& y, const VectorXd& v) const;
};

// Rotation block matrix of the unperturbed (u,v) dynamics; eigenvalues
// e^{+-i theta_j^t}. Throws on degenerate sec (theta at pi/2 + k pi).
MatrixXd build_omega_matrix(const EllipticNormalData& data);

struct ModelPreset {
  FrequencyMap freq;
  EllipticNormalData normal;
  GeneratingHamiltonian ham;
  SchemeModel scheme;
  std::string name;
};

// Presets: twist-1-1, twist-2-1, ruessmann-degenerate-demo.
ModelPreset standard_test_model(const std::string& preset, double eps, double t);

}  // namespace kamtori
