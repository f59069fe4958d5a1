#pragma once

#include <string>
#include <vector>

#include "kamtori/model.hpp"

namespace kamtori {

// Phase-space point in the layout (x, u, y, v); y is relative to the
// expansion point of the generating Hamiltonian. x is kept unwrapped
// (lifted), so rotation numbers can be read off directly.
struct PhasePoint {
  VectorXd x, u, y, v;

  int dim() const { return int(x.size() + u.size() + y.size() + v.size()); }
  VectorXd packed() const;
  static PhasePoint unpack(const VectorXd& z, int n, int m);
};

struct NewtonOptions {
  double tol = 1e-13;
  int max_iter = 50;
};

// One application of the implicit twist map generated by tH:
//   xnew = x + d_y tH,  y = ynew + d_x tH,
//   unew = u + d_v tH,  v = vnew + d_u tH,
// with tH evaluated at (x, u, ynew, vnew). Throws on Newton failure.
PhasePoint apply_twist_map(const GeneratingHamiltonian& ham, const PhasePoint& p,
                           const NewtonOptions& opt = {});
PhasePoint apply_twist_map_inverse(const GeneratingHamiltonian& ham, const PhasePoint& p,
                                   const NewtonOptions& opt = {});

// Jacobian of the map at p, by implicit differentiation of the generating
// relations with the analytic Hessian of tH. Row/column order (x, u, y, v).
MatrixXd twist_map_jacobian(const GeneratingHamiltonian& ham, const PhasePoint& p,
                            const NewtonOptions& opt = {});

// max norm of J^T S J - S with S the standard symplectic form pairing
// (x, u) with (y, v).
double symplecticity_defect(const MatrixXd& jac);

// One implicit midpoint step of step size t for z' = J grad H_eps(z).
PhasePoint apply_scheme_step(const SchemeModel& scheme, const PhasePoint& p, double t,
                             const NewtonOptions& opt = {});

// Reference flow: 11-stage order-8 explicit Runge-Kutta over `substeps`
// equal pieces of the interval t.
PhasePoint reference_flow(const SchemeModel& scheme, const PhasePoint& p, double t,
                          int substeps = 16);

struct Orbit {
  std::vector<PhasePoint> points;  // lifted angles
  int n = 0, m = 0;

  std::string to_csv() const;  // header: step,x*,u*,y*,v*,lifted_x*
};

Orbit iterate_twist_map(const GeneratingHamiltonian& ham, const PhasePoint& start, int steps,
                        const NewtonOptions& opt = {});

}  // namespace kamtori
