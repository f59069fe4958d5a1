#pragma once

#include <complex>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace kamtori {

using Complex = std::complex<double>;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// One monomial slot of a graded Fourier term: e^{i<k,x>} yhat^l u^i vhat^j.
// k and l have the torus dimension n; i and j have the normal dimension m.
struct ModeKey {
  std::vector<int> k;
  std::vector<int> l;
  std::vector<int> i;
  std::vector<int> j;

  bool operator<(const ModeKey& o) const {
    if (k != o.k) return k < o.k;
    if (l != o.l) return l < o.l;
    if (i != o.i) return i < o.i;
    return j < o.j;
  }
  bool operator==(const ModeKey& o) const {
    return k == o.k && l == o.l && i == o.i && j == o.j;
  }

  int k_norm1() const {
    int s = 0;
    for (int kk : k) s += std::abs(kk);
    return s;
  }
  // Weighted polynomial degree 2|l| + |i| + |j| used by the order-2 truncation.
  int graded_degree() const {
    int s = 0;
    for (int v : l) s += 2 * v;
    for (int v : i) s += v;
    for (int v : j) s += v;
    return s;
  }
};

// Second-order jet of a scalar field at a mixed-variable point.
// Variable order throughout: (x_1..x_n, u_1..u_m, yhat_1..yhat_n, vhat_1..vhat_m).
struct Jet2 {
  double value = 0.0;
  VectorXd grad;
  MatrixXd hess;
};

// Real-analytic periodic field on T^n, stored as truncated Fourier coefficients
// with polynomial grading in (yhat, u, vhat). Immutable in spirit: operations
// return new fields.
class FourierField {
 public:
  FourierField() : n_(0), m_(0) {}
  FourierField(int n, int m) : n_(n), m_(m) {}

  int n() const { return n_; }
  int m() const { return m_; }
  int dim() const { return 2 * (n_ + m_); }
  bool empty() const { return coeffs_.empty(); }
  std::size_t size() const { return coeffs_.size(); }

  const std::map<ModeKey, Complex>& coeffs() const { return coeffs_; }

  // Adds into the coefficient at `key` (term plus its conjugate mode are the
  // caller's business; set_real_mode handles the pair).
  void add_term(const ModeKey& key, Complex c);
  // Stores c at k and conj(c) at -k so the field stays real.
  void set_real_mode(const ModeKey& key, Complex c);
  Complex coeff(const ModeKey& key) const;

  double evaluate(const VectorXd& x, const VectorXd& u, const VectorXd& yhat,
                  const VectorXd& vhat) const;
  Jet2 jet(const VectorXd& x, const VectorXd& u, const VectorXd& yhat,
           const VectorXd& vhat) const;

  FourierField deriv_x(int comp) const;
  FourierField deriv_u(int comp) const;
  FourierField deriv_yhat(int comp) const;
  FourierField deriv_vhat(int comp) const;

  // Composition with x -> x + delta: coefficients pick up e^{i<k,delta>}.
  FourierField shift_angle(const VectorXd& delta) const;

  FourierField operator+(const FourierField& o) const;
  FourierField operator-(const FourierField& o) const;
  FourierField scaled(double a) const;

  // Drops coefficients with |c| <= tol and checks reality pairing.
  FourierField pruned(double tol = 1e-16) const;
  // Drops modes with |k|_1 > k_max or graded degree > max_degree.
  FourierField truncated(int k_max, int max_degree) const;

  // Largest violation of P_{-k,l,i,j} = conj(P_{k,l,i,j}).
  double reality_defect() const;
  double max_abs_coeff() const;

  std::string to_json() const;
  static FourierField from_json(const std::string& text, int n, int m);

 private:
  int key_power(const ModeKey& key, int slot) const;

  int n_, m_;
  std::map<ModeKey, Complex> coeffs_;
};

// (R, Ptilde): R keeps exactly the terms with 2|l|+|i|+|j| <= 2,
// Ptilde is the coefficientwise complement.
std::pair<FourierField, FourierField> truncate_order2(const FourierField& field);

// Weighted vector-field norm |‖X_P‖|*_{r;D(s,r)} =
//   ‖d_yhat P‖ + (1/r)‖d_vhat P‖ + (1/r^2)‖d_x P‖ + (1/r)‖d_u P‖
// with sum over x components, max over yhat components and Euclidean
// combination over u / vhat components. The per-mode bound substitutes
// r^{2|l|+|i|+|j|} for the sup over the graded polydisc.
double weighted_norm(const FourierField& field, double s, double r);

// Plain coefficient norm sum_k |P_k|_r e^{s|k|} of a scalar field.
double series_norm(const FourierField& field, double s, double r);

}  // namespace kamtori
