#include "kamtori/fourier.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace kamtori {

namespace {

ModeKey negated_k(const ModeKey& key) {
  ModeKey nk = key;
  for (auto& v : nk.k) v = -v;
  return nk;
}

// value, first and second derivative of t^p at t.
struct Mono {
  double v, d, dd;
};

Mono monomial(double t, int p) {
  Mono m{1.0, 0.0, 0.0};
  if (p == 0) return m;
  double tp2 = 1.0;
  for (int q = 0; q < p - 2; ++q) tp2 *= t;
  const double tp1 = (p >= 1) ? tp2 * ((p >= 2) ? t : 1.0) : 0.0;
  // tp2 = t^{p-2} (for p>=2), tp1 = t^{p-1}
  if (p == 1) {
    m.v = t;
    m.d = 1.0;
    m.dd = 0.0;
  } else {
    m.v = tp1 * t;
    m.d = p * tp1;
    m.dd = double(p) * double(p - 1) * tp2;
  }
  return m;
}

}  // namespace

void FourierField::add_term(const ModeKey& key, Complex c) {
  if (int(key.k.size()) != n_ || int(key.l.size()) != n_ || int(key.i.size()) != m_ ||
      int(key.j.size()) != m_)
    throw std::invalid_argument("FourierField::add_term: mode key shape mismatch");
  auto it = coeffs_.find(key);
  if (it == coeffs_.end()) {
    if (c != Complex(0.0, 0.0)) coeffs_.emplace(key, c);
  } else {
    it->second += c;
  }
}

void FourierField::set_real_mode(const ModeKey& key, Complex c) {
  ModeKey nk = negated_k(key);
  if (nk == key) {
    add_term(key, Complex(c.real(), 0.0));
  } else {
    add_term(key, c);
    add_term(nk, std::conj(c));
  }
}

Complex FourierField::coeff(const ModeKey& key) const {
  auto it = coeffs_.find(key);
  return it == coeffs_.end() ? Complex(0.0, 0.0) : it->second;
}

double FourierField::evaluate(const VectorXd& x, const VectorXd& u,
                              const VectorXd& yhat, const VectorXd& vhat) const {
  Complex acc(0.0, 0.0);
  for (const auto& [key, c] : coeffs_) {
    double phase = 0.0;
    for (int a = 0; a < n_; ++a) phase += key.k[a] * x[a];
    double mono = 1.0;
    for (int a = 0; a < n_; ++a)
      for (int q = 0; q < key.l[a]; ++q) mono *= yhat[a];
    for (int a = 0; a < m_; ++a)
      for (int q = 0; q < key.i[a]; ++q) mono *= u[a];
    for (int a = 0; a < m_; ++a)
      for (int q = 0; q < key.j[a]; ++q) mono *= vhat[a];
    acc += c * std::polar(mono, phase);
  }
  return acc.real();
}

Jet2 FourierField::jet(const VectorXd& x, const VectorXd& u, const VectorXd& yhat,
                       const VectorXd& vhat) const {
  const int d = dim();
  Jet2 out;
  out.grad = VectorXd::Zero(d);
  out.hess = MatrixXd::Zero(d, d);
  Eigen::VectorXcd gc = Eigen::VectorXcd::Zero(d);
  Eigen::MatrixXcd hc = Eigen::MatrixXcd::Zero(d, d);
  Complex val(0.0, 0.0);

  // Variable layout: x (0..n-1), u (n..n+m-1), yhat (n+m..2n+m-1), vhat (rest).
  std::vector<Mono> fac(d);
  for (const auto& [key, c] : coeffs_) {
    double phase = 0.0;
    for (int a = 0; a < n_; ++a) phase += key.k[a] * x[a];
    const Complex ph = std::polar(1.0, phase);

    double poly = 1.0;
    for (int a = 0; a < m_; ++a) {
      fac[n_ + a] = monomial(u[a], key.i[a]);
      poly *= fac[n_ + a].v;
    }
    for (int a = 0; a < n_; ++a) {
      fac[n_ + m_ + a] = monomial(yhat[a], key.l[a]);
      poly *= fac[n_ + m_ + a].v;
    }
    for (int a = 0; a < m_; ++a) {
      fac[n_ + m_ + n_ + a] = monomial(vhat[a], key.j[a]);
      poly *= fac[n_ + m_ + n_ + a].v;
    }
    const Complex base = c * ph;
    val += base * poly;

    // Per-variable logarithmic-derivative style assembly; factors may be zero
    // at the evaluation point so build partial products explicitly.
    auto partial = [&](int slot) -> double {
      // product of all polynomial factors except `slot`, times d(slot)
      double p = fac[slot].d;
      for (int b = n_; b < d; ++b)
        if (b != slot) p *= fac[b].v;
      return p;
    };
    auto partial2 = [&](int s1, int s2) -> double {
      double p = 1.0;
      if (s1 == s2) {
        p = fac[s1].dd;
        for (int b = n_; b < d; ++b)
          if (b != s1) p *= fac[b].v;
      } else {
        p = fac[s1].d * fac[s2].d;
        for (int b = n_; b < d; ++b)
          if (b != s1 && b != s2) p *= fac[b].v;
      }
      return p;
    };

    for (int a = 0; a < n_; ++a) {
      const Complex dx = base * Complex(0.0, key.k[a]) * poly;
      gc[a] += dx;
      for (int b = a; b < n_; ++b)
        hc(a, b) += base * Complex(0.0, key.k[a]) * Complex(0.0, key.k[b]) * poly;
      for (int s = n_; s < d; ++s) hc(a, s) += base * Complex(0.0, key.k[a]) * partial(s);
    }
    for (int s = n_; s < d; ++s) {
      if (key_power(key, s) == 0) continue;
      gc[s] += base * partial(s);
      for (int s2 = s; s2 < d; ++s2) {
        if (s2 != s && key_power(key, s2) == 0) continue;
        hc(s, s2) += base * partial2(s, s2);
      }
    }
  }
  out.value = val.real();
  for (int a = 0; a < d; ++a) out.grad[a] = gc[a].real();
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) {
      out.hess(a, b) = hc(a, b).real();
      out.hess(b, a) = out.hess(a, b);
    }
  return out;
}

int FourierField::key_power(const ModeKey& key, int slot) const {
  if (slot < n_) return 0;
  if (slot < n_ + m_) return key.i[slot - n_];
  if (slot < n_ + m_ + n_) return key.l[slot - n_ - m_];
  return key.j[slot - n_ - m_ - n_];
}

FourierField FourierField::deriv_x(int comp) const {
  FourierField out(n_, m_);
  for (const auto& [key, c] : coeffs_) {
    if (key.k[comp] == 0) continue;
    out.add_term(key, c * Complex(0.0, key.k[comp]));
  }
  return out;
}

FourierField FourierField::deriv_yhat(int comp) const {
  FourierField out(n_, m_);
  for (const auto& [key, c] : coeffs_) {
    const int p = key.l[comp];
    if (p == 0) continue;
    ModeKey nk = key;
    nk.l[comp] = p - 1;
    out.add_term(nk, c * double(p));
  }
  return out;
}

FourierField FourierField::deriv_u(int comp) const {
  FourierField out(n_, m_);
  for (const auto& [key, c] : coeffs_) {
    const int p = key.i[comp];
    if (p == 0) continue;
    ModeKey nk = key;
    nk.i[comp] = p - 1;
    out.add_term(nk, c * double(p));
  }
  return out;
}

FourierField FourierField::deriv_vhat(int comp) const {
  FourierField out(n_, m_);
  for (const auto& [key, c] : coeffs_) {
    const int p = key.j[comp];
    if (p == 0) continue;
    ModeKey nk = key;
    nk.j[comp] = p - 1;
    out.add_term(nk, c * double(p));
  }
  return out;
}

FourierField FourierField::shift_angle(const VectorXd& delta) const {
  FourierField out(n_, m_);
  for (const auto& [key, c] : coeffs_) {
    double phase = 0.0;
    for (int a = 0; a < n_; ++a) phase += key.k[a] * delta[a];
    out.add_term(key, c * std::polar(1.0, phase));
  }
  return out;
}

FourierField FourierField::operator+(const FourierField& o) const {
  FourierField out = *this;
  for (const auto& [key, c] : o.coeffs_) out.add_term(key, c);
  return out;
}

FourierField FourierField::operator-(const FourierField& o) const {
  FourierField out = *this;
  for (const auto& [key, c] : o.coeffs_) out.add_term(key, -c);
  return out;
}

FourierField FourierField::scaled(double a) const {
  FourierField out(n_, m_);
  for (const auto& [key, c] : coeffs_) out.add_term(key, c * a);
  return out;
}

FourierField FourierField::pruned(double tol) const {
  FourierField out(n_, m_);
  for (const auto& [key, c] : coeffs_)
    if (std::abs(c) > tol) out.coeffs_.emplace(key, c);
  return out;
}

FourierField FourierField::truncated(int k_max, int max_degree) const {
  FourierField out(n_, m_);
  for (const auto& [key, c] : coeffs_)
    if (key.k_norm1() <= k_max && key.graded_degree() <= max_degree)
      out.coeffs_.emplace(key, c);
  return out;
}

double FourierField::reality_defect() const {
  double worst = 0.0;
  for (const auto& [key, c] : coeffs_) {
    const Complex mirror = coeff(negated_k(key));
    worst = std::max(worst, std::abs(c - std::conj(mirror)));
  }
  return worst;
}

double FourierField::max_abs_coeff() const {
  double worst = 0.0;
  for (const auto& [key, c] : coeffs_) worst = std::max(worst, std::abs(c));
  return worst;
}

std::string FourierField::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [key, c] : coeffs_) {
    nlohmann::json rec;
    rec["k"] = key.k;
    rec["l"] = key.l;
    rec["i"] = key.i;
    rec["j"] = key.j;
    rec["re"] = c.real();
    rec["im"] = c.imag();
    arr.push_back(rec);
  }
  return arr.dump(2);
}

FourierField FourierField::from_json(const std::string& text, int n, int m) {
  FourierField out(n, m);
  nlohmann::json arr = nlohmann::json::parse(text);
  for (const auto& rec : arr) {
    ModeKey key;
    key.k = rec.at("k").get<std::vector<int>>();
    key.l = rec.at("l").get<std::vector<int>>();
    key.i = rec.at("i").get<std::vector<int>>();
    key.j = rec.at("j").get<std::vector<int>>();
    if ((int)key.k.size() != n || (int)key.l.size() != n || (int)key.i.size() != m ||
        (int)key.j.size() != m)
      throw std::runtime_error("coefficient record has wrong dimensions");
    out.add_term(key, Complex(rec.at("re").get<double>(), rec.at("im").get<double>()));
  }
  return out;
}

std::pair<FourierField, FourierField> truncate_order2(const FourierField& field) {
  FourierField r(field.n(), field.m()), tail(field.n(), field.m());
  for (const auto& [key, c] : field.coeffs()) {
    if (key.graded_degree() <= 2)
      r.add_term(key, c);
    else
      tail.add_term(key, c);
  }
  return {r, tail};
}

namespace {

// sum_k [sum_{lij} |c| r^{2|l|+|i|+|j|}] e^{s|k|}
double graded_series_norm(const FourierField& f, double s, double r) {
  double total = 0.0;
  for (const auto& [key, c] : f.coeffs()) {
    total += std::abs(c) * std::pow(r, key.graded_degree()) * std::exp(s * key.k_norm1());
  }
  return total;
}

}  // namespace

double series_norm(const FourierField& field, double s, double r) {
  return graded_series_norm(field, s, r);
}

double weighted_norm(const FourierField& field, double s, double r) {
  if (r <= 0.0) throw std::invalid_argument("weighted_norm: r must be positive");
  if (s < 0.0) throw std::invalid_argument("weighted_norm: s must be nonnegative");
  const int n = field.n(), m = field.m();

  double x_part = 0.0;  // sum over components
  for (int a = 0; a < n; ++a) x_part += graded_series_norm(field.deriv_x(a), s, r);

  double y_part = 0.0;  // max over components
  for (int a = 0; a < n; ++a)
    y_part = std::max(y_part, graded_series_norm(field.deriv_yhat(a), s, r));

  double u_part = 0.0, v_part = 0.0;  // Euclidean over components
  for (int a = 0; a < m; ++a) {
    const double gu = graded_series_norm(field.deriv_u(a), s, r);
    const double gv = graded_series_norm(field.deriv_vhat(a), s, r);
    u_part += gu * gu;
    v_part += gv * gv;
  }
  u_part = std::sqrt(u_part);
  v_part = std::sqrt(v_part);

  return y_part + v_part / r + x_part / (r * r) + u_part / r;
}

}  // namespace kamtori
