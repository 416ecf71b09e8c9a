#include "kamred/fourier.hpp"

#include <algorithm>
#include <cmath>

#include "kamred/errors.hpp"
#include "nlohmann/json.hpp"

namespace kamred {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

void check_compatible(const FourierMap& a, const FourierMap& b, const char* op) {
  if (a.dim() != b.dim()) throw Error(std::string(op) + ": dimension mismatch");
}
}  // namespace

FourierMap FourierMap::constant(int dim, const Mat2c& value, Period period, Algebra algebra) {
  FourierMap f(dim, period, algebra);
  f.set_coeff(Mode(), value);
  return f;
}

FourierMap FourierMap::zero(int dim, Period period, Algebra algebra) {
  return FourierMap(dim, period, algebra);
}

int FourierMap::max_abs_mode() const {
  int m = 0;
  for (const auto& [n, c] : coeffs_) m = std::max(m, n.abs1());
  return m;
}

Mat2c FourierMap::coeff(const Mode& m) const {
  auto it = coeffs_.find(m);
  return it == coeffs_.end() ? Mat2c(Mat2c::Zero()) : it->second;
}

void FourierMap::set_coeff(const Mode& m, const Mat2c& value) {
  if (value.isZero(0.0)) {
    coeffs_.erase(m);
  } else {
    coeffs_[m] = value;
  }
}

void FourierMap::add_coeff(const Mode& m, const Mat2c& value) {
  auto it = coeffs_.find(m);
  if (it == coeffs_.end()) {
    coeffs_.emplace(m, value);
  } else {
    it->second += value;
  }
}

void FourierMap::drop_small(double rel) {
  double top = 0.0;
  for (const auto& [n, c] : coeffs_) top = std::max(top, spectral_norm(c));
  const double floor = rel * top;
  for (auto it = coeffs_.begin(); it != coeffs_.end();) {
    if (spectral_norm(it->second) <= floor) {
      it = coeffs_.erase(it);
    } else {
      ++it;
    }
  }
}

void FourierMap::prune_weighted(double h, double abs_floor) {
  const double hf = half_factor();
  for (auto it = coeffs_.begin(); it != coeffs_.end();) {
    const double w = spectral_norm(it->second) * std::exp(it->first.abs1() * hf * h);
    if (w <= abs_floor) {
      it = coeffs_.erase(it);
    } else {
      ++it;
    }
  }
}

Mat2c FourierMap::evaluate(const Eigen::VectorXd& theta) const {
  Mat2c out = Mat2c::Zero();
  const double hf = half_factor();
  for (const auto& [n, c] : coeffs_) {
    double phase = 0.0;
    for (int i = 0; i < dim_; ++i) phase += n[i] * theta[i];
    out += c * std::polar(1.0, kTwoPi * hf * phase);
  }
  return out;
}

Mat2c FourierMap::evaluate(double theta) const {
  Eigen::VectorXd t(1);
  t << theta;
  return evaluate(t);
}

Mat2d FourierMap::evaluate_real(const Eigen::VectorXd& theta) const {
  const Mat2c v = evaluate(theta);
  const double scale = std::max(1.0, spectral_norm(v));
  if (v.imag().cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw Error("evaluate_real: imaginary residue exceeds tolerance");
  }
  return v.real();
}

std::pair<FourierMap, FourierMap> FourierMap::truncate(int order) const {
  FourierMap low(dim_, period_, algebra_), high(dim_, period_, algebra_);
  for (const auto& [n, c] : coeffs_) {
    (n.abs1() <= order ? low : high).coeffs_[n] = c;
  }
  return {low, high};
}

double FourierMap::strip_norm(double h) const {
  if (h < 0) throw Error("strip_norm: negative width");
  const double hf = half_factor();
  double sum = 0.0;
  for (const auto& [n, c] : coeffs_) {
    const double term = spectral_norm(c) * std::exp(n.abs1() * hf * h);
    if (!std::isfinite(term)) {
      throw OverflowError("strip_norm: term overflow, h too large for stored modes");
    }
    sum += term;
  }
  if (!std::isfinite(sum)) throw OverflowError("strip_norm: sum overflow");
  return sum;
}

namespace {

/// Enumerate multi-indices k' with |k'|_1 <= k over dim components.
void enumerate_multi(int dim, int k, std::vector<std::array<int, 3>>& out) {
  std::array<int, 3> idx{0, 0, 0};
  if (dim == 1) {
    for (int a = 0; a <= k; ++a) {
      idx[0] = a;
      out.push_back(idx);
    }
    return;
  }
  if (dim == 2) {
    for (int a = 0; a <= k; ++a)
      for (int b = 0; a + b <= k; ++b) out.push_back({a, b, 0});
    return;
  }
  for (int a = 0; a <= k; ++a)
    for (int b = 0; a + b <= k; ++b)
      for (int c = 0; a + b + c <= k; ++c) out.push_back({a, b, c});
}

}  // namespace

double FourierMap::ck_norm(int k, int grid_per_dim) const {
  if (coeffs_.empty()) return 0.0;
  const double hf = half_factor();
  std::vector<std::array<int, 3>> orders;
  enumerate_multi(dim_, k, orders);

  double best = 0.0;
  const long total = static_cast<long>(std::pow(static_cast<double>(grid_per_dim), dim_));
  std::vector<std::pair<Mode, Mat2c>> table(coeffs_.begin(), coeffs_.end());
  for (const auto& kp : orders) {
    // Differentiate term-wise: factor prod (2 pi i nu_a)^{k'_a}.
    std::vector<std::pair<Mode, Mat2c>> diff;
    diff.reserve(table.size());
    for (const auto& [n, c] : table) {
      Complex factor(1.0, 0.0);
      for (int a = 0; a < dim_; ++a) {
        const Complex base(0.0, kTwoPi * hf * n[a]);
        for (int p = 0; p < kp[a]; ++p) factor *= base;
      }
      if (factor != Complex(0.0, 0.0)) diff.emplace_back(n, Mat2c(c * factor));
    }
    // Sup over the uniform grid.
    Eigen::VectorXd theta(dim_);
    for (long g = 0; g < total; ++g) {
      long rem = g;
      for (int a = 0; a < dim_; ++a) {
        theta[a] = (period_ == Period::double_torus ? 2.0 : 1.0) * (rem % grid_per_dim) /
                   static_cast<double>(grid_per_dim);
        rem /= grid_per_dim;
      }
      Mat2c v = Mat2c::Zero();
      for (const auto& [n, c] : diff) {
        double phase = 0.0;
        for (int i = 0; i < dim_; ++i) phase += n[i] * theta[i];
        v += c * std::polar(1.0, kTwoPi * hf * phase);
      }
      best = std::max(best, spectral_norm(v));
    }
  }
  return best;
}

FourierMap FourierMap::operator+(const FourierMap& o) const {
  check_compatible(*this, o, "add");
  if (period_ != o.period_) {
    return to_double_torus() + o.to_double_torus();
  }
  FourierMap out = *this;
  out.algebra_ = (algebra_ == o.algebra_) ? algebra_ : Algebra::gl2c;
  for (const auto& [n, c] : o.coeffs_) out.add_coeff(n, c);
  out.drop_small();
  return out;
}

FourierMap FourierMap::operator-(const FourierMap& o) const { return *this + o.scaled(-1.0); }

FourierMap FourierMap::scaled(Complex factor) const {
  FourierMap out = *this;
  for (auto& [n, c] : out.coeffs_) c *= factor;
  return out;
}

FourierMap FourierMap::product(const FourierMap& o) const {
  check_compatible(*this, o, "product");
  if (period_ != o.period_) {
    return to_double_torus().product(o.to_double_torus());
  }
  FourierMap out(dim_, period_, Algebra::gl2c);
  for (const auto& [m, a] : coeffs_) {
    for (const auto& [n, b] : o.coeffs_) {
      out.add_coeff(m + n, a * b);
    }
  }
  out.drop_small();
  return out;
}

FourierMap FourierMap::shifted(const Eigen::VectorXd& alpha) const {
  FourierMap out = *this;
  const double hf = half_factor();
  for (auto& [n, c] : out.coeffs_) {
    double phase = 0.0;
    for (int i = 0; i < dim_; ++i) phase += n[i] * alpha[i];
    c *= std::polar(1.0, kTwoPi * hf * phase);
  }
  return out;
}

FourierMap FourierMap::conjugated_by(const Mat2c& w) const {
  FourierMap out = *this;
  const Mat2c winv = w.inverse();
  for (auto& [n, c] : out.coeffs_) c = w * c * winv;
  out.algebra_ = Algebra::gl2c;
  return out;
}

FourierMap FourierMap::sl2_inverse() const {
  FourierMap out(dim_, period_, Algebra::gl2c);
  for (const auto& [n, c] : coeffs_) {
    Mat2c adj;
    adj << c(1, 1), -c(0, 1), -c(1, 0), c(0, 0);
    out.coeffs_[n] = adj;
  }
  return out;
}

FourierMap FourierMap::transpose_conjugate() const {
  FourierMap out(dim_, period_, Algebra::gl2c);
  for (const auto& [n, c] : coeffs_) out.coeffs_[-n] = c.adjoint();
  return out;
}

FourierMap FourierMap::to_double_torus() const {
  if (period_ == Period::double_torus) return *this;
  FourierMap out(dim_, Period::double_torus, algebra_);
  for (const auto& [n, c] : coeffs_) {
    out.coeffs_[Mode(2 * n[0], 2 * n[1], 2 * n[2])] = c;
  }
  return out;
}

FourierMap FourierMap::to_torus() const {
  if (period_ == Period::torus) return *this;
  FourierMap out(dim_, Period::torus, algebra_);
  double odd_mass = 0.0, scale = 0.0;
  for (const auto& [n, c] : coeffs_) {
    const bool even = n[0] % 2 == 0 && n[1] % 2 == 0 && n[2] % 2 == 0;
    const double nn = spectral_norm(c);
    scale = std::max(scale, nn);
    if (even) {
      out.coeffs_[Mode(n[0] / 2, n[1] / 2, n[2] / 2)] = c;
    } else {
      odd_mass += nn;
    }
  }
  if (odd_mass > 1e-10 * std::max(scale, 1e-300)) {
    throw Error("to_torus: genuine half-integer modes present");
  }
  return out;
}

FourierMap FourierMap::realified(bool traceless) const {
  FourierMap out(dim_, period_, algebra_);
  for (const auto& [n, c] : coeffs_) {
    Mat2c v = 0.5 * (c + coeff(-n).conjugate());
    if (traceless) {
      const Complex tr = 0.5 * (v(0, 0) + v(1, 1));
      v(0, 0) -= tr;
      v(1, 1) -= tr;
    }
    if (!v.isZero(0.0)) out.coeffs_[n] = v;
  }
  out.drop_small();
  return out;
}

FourierMap exp_series(const FourierMap& f, double tol) {
  FourierMap out = FourierMap::constant(f.dim(), Mat2c::Identity(), f.period());
  FourierMap term = out;
  const double scale = std::max(1.0, f.strip_norm(0.0));
  for (int k = 1; k <= 64; ++k) {
    term = term.product(f).scaled(1.0 / k);
    term.drop_small(1e-18);
    out = out + term;
    const double tn = term.strip_norm(0.0);
    if (tn <= tol * scale) {
      out.drop_small();
      return out;
    }
  }
  throw NonConvergenceError("exp_series: no convergence in 64 terms");
}

FourierMap log_series(const FourierMap& g, double tol) {
  FourierMap h = g - FourierMap::constant(g.dim(), Mat2c::Identity(), g.period());
  const double h0 = h.strip_norm(0.0);
  if (h0 > 0.9) throw NonConvergenceError("log_series: map too far from identity");
  FourierMap out = h;
  FourierMap power = h;
  const double scale = std::max(1.0, h0);
  for (int k = 2; k <= 96; ++k) {
    power = power.product(h);
    power.drop_small(1e-18);
    const FourierMap term = power.scaled((k % 2 == 0 ? -1.0 : 1.0) / k);
    out = out + term;
    if (power.strip_norm(0.0) / k <= tol * scale) {
      out.drop_small();
      return out;
    }
  }
  throw NonConvergenceError("log_series: no convergence in 96 terms");
}

FourierMap half_rotation_map(int dim, const Mode& w) {
  // R_{<w,theta>/2} = cos(pi <w,theta>) I + sin(pi <w,theta>) J with
  // J = [[0,-1],[1,0]]; two modes at +-w on 2T^d.
  FourierMap q(dim, Period::double_torus, Algebra::gl2c);
  if (w.is_zero()) {
    q.set_coeff(w, Mat2c::Identity());
    return q;
  }
  Mat2c jmat;
  jmat << 0.0, -1.0, 1.0, 0.0;
  const Complex i(0.0, 1.0);
  const Mat2c plus = 0.5 * (Mat2c::Identity() - i * jmat);
  const Mat2c minus = 0.5 * (Mat2c::Identity() + i * jmat);
  q.set_coeff(w, plus);
  q.set_coeff(-w, minus);
  return q;
}

FourierMap smooth_approximate(const FourierMap& f, int j, const ApproxParams& params) {
  if (j < 1) throw Error("smooth_approximate: j must be >= 1");
  return f.truncate(params.cutoff(j)).first;
}

// -- JSON --------------------------------------------------------------------

std::string fourier_to_json(const FourierMap& f) {
  nlohmann::json out;
  out["dim"] = f.dim();
  out["period"] = f.period() == Period::torus ? "torus" : "2torus";
  out["convention"] = "2pi";
  switch (f.algebra()) {
    case Algebra::sl2r: out["algebra"] = "sl2R"; break;
    case Algebra::su11: out["algebra"] = "su11"; break;
    case Algebra::gl2c: out["algebra"] = "gl2C"; break;
  }
  nlohmann::json coeffs = nlohmann::json::array();
  for (const auto& [n, c] : f.coeffs()) {
    nlohmann::json entry;
    std::vector<int> idx(n.n.begin(), n.n.begin() + f.dim());
    entry["n"] = idx;
    entry["re"] = {{c(0, 0).real(), c(0, 1).real()}, {c(1, 0).real(), c(1, 1).real()}};
    entry["im"] = {{c(0, 0).imag(), c(0, 1).imag()}, {c(1, 0).imag(), c(1, 1).imag()}};
    coeffs.push_back(std::move(entry));
  }
  out["coeffs"] = std::move(coeffs);
  return out.dump();
}

FourierMap fourier_from_json(const std::string& text) {
  const nlohmann::json in = nlohmann::json::parse(text);
  const int dim = in.at("dim").get<int>();
  const Period period = in.at("period").get<std::string>() == "2torus" ? Period::double_torus
                                                                       : Period::torus;
  Algebra algebra = Algebra::gl2c;
  if (in.contains("algebra")) {
    const std::string a = in["algebra"].get<std::string>();
    algebra = a == "sl2R" ? Algebra::sl2r : a == "su11" ? Algebra::su11 : Algebra::gl2c;
  }
  FourierMap f(dim, period, algebra);
  for (const auto& entry : in.at("coeffs")) {
    Mode n;
    const auto idx = entry.at("n").get<std::vector<int>>();
    for (std::size_t i = 0; i < idx.size() && i < 3; ++i) n[static_cast<int>(i)] = idx[i];
    Mat2c c;
    for (int r = 0; r < 2; ++r)
      for (int s = 0; s < 2; ++s)
        c(r, s) = Complex(entry.at("re")[r][s].get<double>(), entry.at("im")[r][s].get<double>());
    f.set_coeff(n, c);
  }
  return f;
}

// -- ScalarSeries --------------------------------------------------------------

double ScalarSeries::evaluate(const Eigen::VectorXd& theta) const {
  Complex out(0.0, 0.0);
  for (const auto& [n, c] : coeffs) {
    double phase = 0.0;
    for (int i = 0; i < dim; ++i) phase += n[i] * theta[i];
    out += c * std::polar(1.0, kTwoPi * phase);
  }
  return out.real();
}

double ScalarSeries::evaluate(double theta) const {
  Eigen::VectorXd t(1);
  t << theta;
  return evaluate(t);
}

double ScalarSeries::sup_bound() const {
  double s = 0.0;
  for (const auto& [n, c] : coeffs) s += std::abs(c);
  return s;
}

int ScalarSeries::max_abs_mode() const {
  int m = 0;
  for (const auto& [n, c] : coeffs) m = std::max(m, n.abs1());
  return m;
}

ScalarSeries ScalarSeries::cosine(int dim) {
  ScalarSeries v;
  v.dim = dim;
  v.coeffs[Mode(1)] = 1.0;
  v.coeffs[Mode(-1)] = 1.0;
  return v;
}

}  // namespace kamred
