#include "kamred/cocycle.hpp"

#include <cmath>
#include <limits>

#include "kamred/errors.hpp"

namespace kamred {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Enumerate modes 0 < |m|_1 <= n_max (d <= 3), in |m|_1-then-lex order.
template <typename F>
void for_each_mode(int dim, int n_max, F&& fn) {
  if (dim == 1) {
    for (int r = 1; r <= n_max; ++r) {
      fn(Mode(-r));
      fn(Mode(r));
    }
    return;
  }
  for (int r = 1; r <= n_max; ++r) {
    if (dim == 2) {
      for (int a = -r; a <= r; ++a) {
        const int rem = r - std::abs(a);
        if (rem == 0) {
          fn(Mode(a, 0));
        } else {
          fn(Mode(a, -rem));
          fn(Mode(a, rem));
        }
      }
    } else {
      for (int a = -r; a <= r; ++a) {
        for (int b = -(r - std::abs(a)); b <= r - std::abs(a); ++b) {
          const int rem = r - std::abs(a) - std::abs(b);
          if (rem == 0) {
            fn(Mode(a, b, 0));
          } else {
            fn(Mode(a, b, -rem));
            fn(Mode(a, b, rem));
          }
        }
      }
    }
  }
}
}  // namespace

double dist_to_integers(double x) {
  const double f = x - std::floor(x);
  return std::min(f, 1.0 - f);
}

double mod1(double x) {
  double f = x - std::floor(x);
  if (f >= 1.0) f -= 1.0;
  return f;
}

Frequency::Frequency(Eigen::VectorXd alpha_, double kappa_, double tau_)
    : alpha(std::move(alpha_)), kappa(kappa_), tau(tau_) {
  if (alpha.size() < 1 || alpha.size() > 3) throw ConfigError("Frequency: dim must be 1..3");
  bool ok = true;
  for_each_mode(dim(), 64, [&](const Mode& m) {
    if (!ok) return;
    if (dist_to_integers(pairing(m)) <= 1e-9) ok = false;
  });
  if (!ok) throw ConfigError("Frequency: rational dependence witness found for |m|_1 <= 64");
}

Frequency Frequency::golden(double kappa_, double tau_) {
  Eigen::VectorXd a(1);
  a << 0.5 * (std::sqrt(5.0) - 1.0);
  return Frequency(a, kappa_, tau_);
}

double Frequency::pairing(const Mode& m) const {
  double s = 0.0;
  for (int i = 0; i < dim(); ++i) s += m[i] * alpha[i];
  return s;
}

ConstantCocycle::ConstantCocycle(const Mat2d& a) : A(a) {
  const double det = A.determinant();
  if (std::abs(det - 1.0) > 1e-12) throw Error("ConstantCocycle: |det - 1| > 1e-12");
  rho = rho_of(A);
}

Complex ConstantCocycle::oriented() const { return oriented_rho(A); }

Cocycle Cocycle::make_constant(Frequency freq, const Mat2d& a) {
  Cocycle c;
  c.kind_ = Kind::constant;
  c.freq_ = std::move(freq);
  c.constant_ = ConstantCocycle(a);
  return c;
}

Cocycle Cocycle::make_perturbed(Frequency freq, const Mat2d& a, FourierMap f_sl2r) {
  Cocycle c;
  c.kind_ = Kind::perturbed;
  c.freq_ = std::move(freq);
  c.constant_ = ConstantCocycle(a);
  c.map_ = std::move(f_sl2r);
  return c;
}

Cocycle Cocycle::make_direct(Frequency freq, FourierMap map) {
  Cocycle c;
  c.kind_ = Kind::direct;
  c.freq_ = std::move(freq);
  c.map_ = std::move(map);
  return c;
}

const FourierMap& Cocycle::perturbation() const {
  if (kind_ != Kind::perturbed) throw Error("Cocycle: no perturbation form");
  return map_;
}

const FourierMap& Cocycle::direct_map() const {
  if (kind_ != Kind::direct) throw Error("Cocycle: no direct map");
  return map_;
}

Mat2d Cocycle::value(const Eigen::VectorXd& theta) const {
  switch (kind_) {
    case Kind::constant:
      return constant_.A;
    case Kind::perturbed: {
      const Mat2c f = map_.evaluate(theta);
      return constant_.A * expm_traceless(Mat2d(f.real()));
    }
    case Kind::direct:
      return map_.evaluate(theta).real();
  }
  return Mat2d::Identity();
}

Mat2d Cocycle::value(double theta) const {
  Eigen::VectorXd t(1);
  t << theta;
  return value(t);
}

FourierMap Cocycle::as_fourier() const {
  switch (kind_) {
    case Kind::constant:
      return FourierMap::constant(dim(), constant_.A.cast<Complex>());
    case Kind::perturbed: {
      if (!cached_exp_) {
        FourierMap e = exp_series(map_);
        cached_exp_ = FourierMap::constant(dim(), constant_.A.cast<Complex>()).product(e);
      }
      return *cached_exp_;
    }
    case Kind::direct:
      return map_;
  }
  return FourierMap::constant(dim(), Mat2c::Identity());
}

Conjugation Conjugation::identity(int dim) {
  Conjugation z;
  z.map = FourierMap::constant(dim, Mat2c::Identity(), Period::double_torus);
  z.degree = Eigen::VectorXi::Zero(dim);
  return z;
}

Mat2d iterate(const Cocycle& c, const Eigen::VectorXd& theta, long n) {
  Mat2d prod = Mat2d::Identity();
  const Eigen::VectorXd& alpha = c.freq().alpha;
  if (n >= 0) {
    Eigen::VectorXd t = theta;
    for (long k = 0; k < n; ++k) {
      prod = c.value(t) * prod;
      t += alpha;
    }
    return prod;
  }
  // A_{-n}(theta) = A_n(theta - n alpha)^{-1} with n > 0 here.
  const long m = -n;
  const Eigen::VectorXd base = theta - static_cast<double>(m) * alpha;
  Mat2d fwd = iterate(c, base, m);
  Mat2d inv;
  inv << fwd(1, 1), -fwd(0, 1), -fwd(1, 0), fwd(0, 0);  // SL(2,R) adjugate
  return inv;
}

Mat2d iterate(const Cocycle& c, double theta, long n) {
  Eigen::VectorXd t(1);
  t << theta;
  return iterate(c, t, n);
}

namespace {

double angle_of(const Vec2d& v) { return std::atan2(v[1], v[0]); }

double wrap_pm_pi(double d) {
  while (d > M_PI) d -= kTwoPi;
  while (d <= -M_PI) d += kTwoPi;
  return d;
}

/// Polar rotation angle of a positive-determinant 2x2 matrix M = R_omega P
/// with P symmetric positive definite. Every vector advance of M lies within
/// pi/2 of omega, so omega is a uniformly safe unwrapping center.
double polar_angle(const Mat2d& m) {
  return std::atan2(m(1, 0) - m(0, 1), m(0, 0) + m(1, 1));
}

/// Continuous lift of theta -> polar_angle(M(theta)) over one period along
/// the first axis (the lift exists for cocycles homotopic to the identity,
/// which the rotation-number contract asserts).
struct PolarLift {
  std::vector<double> values;  // lifted omega on a uniform grid
  double period = 1.0;

  static PolarLift build(const Cocycle& c, int grid) {
    PolarLift lift;
    bool doubled = false;
    try {
      doubled = !c.is_constant() && !c.has_perturbation() &&
                c.direct_map().period() == Period::double_torus;
    } catch (...) {
    }
    lift.period = doubled ? 2.0 : 1.0;
    lift.values.resize(grid + 1);
    double prev = 0.0;
    for (int i = 0; i <= grid; ++i) {
      Eigen::VectorXd t = Eigen::VectorXd::Zero(c.dim());
      t[0] = lift.period * i / grid;
      const double raw = polar_angle(c.value(t));
      lift.values[i] = (i == 0) ? raw : prev + wrap_pm_pi(raw - prev);
      prev = lift.values[i];
    }
    return lift;
  }

  /// Lifted center at theta: the exact polar angle of m, on the branch picked
  /// by the precomputed grid lift.
  double center(double theta1, const Mat2d& m) const {
    const int grid = static_cast<int>(values.size()) - 1;
    double frac = theta1 / period - std::floor(theta1 / period);
    const double approx = values[static_cast<int>(frac * grid)];
    const double raw = polar_angle(m);
    return approx + wrap_pm_pi(raw - approx);
  }
};

}  // namespace

namespace {

/// Lifted angle increment sum over n steps from theta0 = 0, v0 = (1,0).
/// Increments are wrapped into the window centered at the coherently lifted
/// polar angle of the step matrix, a continuous lift of the projective action
/// (exact for d = 1; for d > 1 the raw polar branch is used, adequate for the
/// near-constant cocycles in scope).
double lifted_sum(const Cocycle& c, long n, double* half_sum) {
  Eigen::VectorXd t = Eigen::VectorXd::Zero(c.dim());
  const Eigen::VectorXd& alpha = c.freq().alpha;
  std::optional<PolarLift> lift;
  if (c.dim() == 1) lift = PolarLift::build(c, 8192);
  Vec2d v(1.0, 0.0);
  double sum = 0.0;
  if (half_sum) *half_sum = 0.0;
  for (long k = 0; k < n; ++k) {
    const Mat2d a = c.value(t);
    const Vec2d w = a * v;
    const double center = lift ? lift->center(t[0], a) : polar_angle(a);
    const double raw = angle_of(w) - angle_of(v);
    sum += center + wrap_pm_pi(raw - center);
    if (half_sum && k + 1 == n / 2) *half_sum = sum;
    v = w.normalized();
    t += alpha;
  }
  return sum;
}

}  // namespace

double rotation_number(const Cocycle& c, long n_iter) {
  if (n_iter < 4) throw Error("rotation_number: n_iter too small");
  double half = 0.0;
  const double full = lifted_sum(c, n_iter, &half);
  const double avg_n = full / n_iter / kTwoPi;
  const double avg_h = half / (n_iter / 2) / kTwoPi;
  const double drift = std::abs(avg_n - avg_h);
  if (drift > 10.0 / static_cast<double>(n_iter)) {
    throw NonConvergenceError("rotation_number: dyadic window averages differ by " +
                              std::to_string(drift));
  }
  // Richardson: cancel the leading 1/n term; equals the second-half average.
  return mod1(2.0 * avg_n - avg_h);
}

namespace {

int winding_once(const FourierMap& z, int axis, int samples, double* min_col) {
  const double period = z.period() == Period::double_torus ? 2.0 : 1.0;
  Eigen::VectorXd t = Eigen::VectorXd::Zero(std::max(1, z.dim()));
  double total = 0.0;
  double prev = 0.0;
  *min_col = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= samples; ++k) {
    t[axis] = period * k / samples;
    const Mat2c m = z.evaluate(t);
    const Vec2d col(m(0, 0).real(), m(1, 0).real());
    *min_col = std::min(*min_col, col.norm());
    const double a = angle_of(col);
    if (k > 0) {
      double d = a - prev;
      while (d > M_PI) d -= kTwoPi;
      while (d <= -M_PI) d += kTwoPi;
      total += d;
    }
    prev = a;
  }
  const double w = total / kTwoPi;
  return static_cast<int>(std::lround(w));
}

}  // namespace

int winding_degree(const FourierMap& z, int axis, int samples) {
  const FourierMap zz = z.period() == Period::double_torus ? z : z.to_double_torus();
  double min_col = 0.0;
  int n = winding_once(zz, axis, samples, &min_col);
  double check_min = 0.0;
  const int n4 = winding_once(zz, axis, 4 * samples, &check_min);
  if (min_col <= 1e-8 || check_min <= 1e-8) {
    throw NearSingularError("winding_degree: first column nearly singular on the circle");
  }
  if (n != n4) {
    // one refinement retry, then fail
    double m16 = 0.0;
    const int n16 = winding_once(zz, axis, 16 * samples, &m16);
    if (n16 != n4 || m16 <= 1e-8) {
      throw NearSingularError("winding_degree: winding did not stabilize under refinement");
    }
    n = n16;
  }
  return n;
}

Eigen::VectorXi winding_degree_all(const FourierMap& z) {
  Eigen::VectorXi deg(z.dim());
  for (int a = 0; a < z.dim(); ++a) deg[a] = winding_degree(z, a);
  return deg;
}

Cocycle conjugate(const Cocycle& c, const Conjugation& z) {
  const FourierMap zmap = z.map.period() == Period::double_torus ? z.map : z.map.to_double_torus();
  const FourierMap inner = c.as_fourier().to_double_torus();
  FourierMap out = zmap.shifted(c.freq().alpha).product(inner).product(zmap.sl2_inverse());
  out.drop_small();
  // Fold back when the conjugated map has integer frequencies only.
  try {
    out = out.to_torus();
  } catch (const Error&) {
    // genuinely a 2T^d cocycle; keep doubled storage
  }
  return Cocycle::make_direct(c.freq(), std::move(out));
}

double lyapunov_exponent(const Cocycle& c, long n_iter, int phases) {
  if (n_iter < 1) throw Error("lyapunov_exponent: n_iter must be positive");
  phases = std::max(phases, 32);
  const Eigen::VectorXd& alpha = c.freq().alpha;
  double acc = 0.0;
  for (int p = 0; p < phases; ++p) {
    Eigen::VectorXd t = Eigen::VectorXd::Constant(c.dim(), static_cast<double>(p) / phases);
    Mat2d prod = Mat2d::Identity();
    double logsum = 0.0;
    for (long k = 0; k < n_iter; ++k) {
      prod = c.value(t) * prod;
      t += alpha;
      if ((k + 1) % 32 == 0) {
        const double nrm = prod.norm();
        logsum += std::log(nrm);
        prod /= nrm;
      }
    }
    const double nrm = prod.norm();
    if (nrm > 0) logsum += std::log(nrm);
    acc += logsum / static_cast<double>(n_iter);
  }
  return acc / phases;
}

HyperbolicityCertificate cone_certificate(const Cocycle& c, int grid, int window) {
  const Eigen::VectorXd& alpha = c.freq().alpha;
  HyperbolicityCertificate cert;
  double min_rate = std::numeric_limits<double>::infinity();
  double min_trans = std::numeric_limits<double>::infinity();
  const double spread = 1.0;

  for (int gidx = 0; gidx < grid; ++gidx) {
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(c.dim());
    theta[0] = spread * gidx / grid;
    if (c.dim() > 1) theta += (static_cast<double>(gidx) / grid) * alpha;

    // Forward window products from theta, renormalized. The growth rate is
    // the full-window log norm against the running maximum over the first
    // half: a bounded (elliptic/parabolic) product revisits its maximum
    // within the half window, so the measured rate drops to zero, while a
    // dichotomy keeps growing; the dichotomy constant cancels.
    Mat2d prod = Mat2d::Identity();
    Eigen::VectorXd t = theta;
    double logsum = 0.0;
    double max_first_half = 0.0;
    double min_first_half = std::numeric_limits<double>::infinity();
    for (int k = 0; k < window; ++k) {
      prod = c.value(t) * prod;
      t += alpha;
      const double nrm = prod.norm();
      logsum += std::log(nrm);
      prod /= nrm;
      if (k + 1 <= window / 2) {
        const double l = logsum + std::log(spectral_norm(prod));
        max_first_half = std::max(max_first_half, l);
        min_first_half = std::min(min_first_half, l);
      }
    }
    const double l_full = logsum + std::log(spectral_norm(prod));
    // Discount the observed oscillation: a bounded product with a slowly
    // aliasing phase can gain at most its oscillation range per window.
    const double osc = std::max(0.0, max_first_half - min_first_half);
    const double rate =
        (l_full - max_first_half) / (window - window / 2) - osc / (2.0 * window);
    min_rate = std::min(min_rate, rate);

    // Stable direction at theta from the forward window product; unstable
    // direction from the product ending at theta.
    Eigen::JacobiSVD<Mat2d> svd_f(prod, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec2d s_dir = svd_f.matrixV().col(1);

    Mat2d back = Mat2d::Identity();
    Eigen::VectorXd tb = theta - static_cast<double>(window) * alpha;
    for (int k = 0; k < window; ++k) {
      back = c.value(tb) * back;
      tb += alpha;
      back /= back.norm();
    }
    Eigen::JacobiSVD<Mat2d> svd_b(back, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec2d u_dir = svd_b.matrixU().col(0);

    const double cross = std::abs(u_dir[0] * s_dir[1] - u_dir[1] * s_dir[0]);
    min_trans = std::min(min_trans, cross);
  }

  cert.rate = min_rate;
  cert.transversality = min_trans;
  cert.margin = std::min(min_rate, min_trans);
  if (std::abs(cert.margin) < 1e-9) cert.margin = 0.0;  // exact-arithmetic zero
  cert.hyperbolic = cert.margin >= 1e-6;
  return cert;
}

bool is_uniformly_hyperbolic(const Cocycle& c) {
  const HyperbolicityCertificate cert = cone_certificate(c);
  if (cert.margin > 0.0 && cert.margin < 1e-6) {
    throw InconclusiveError("is_uniformly_hyperbolic: contraction margin inconclusive",
                            cert.margin);
  }
  return cert.hyperbolic;
}

bool diophantine_check(const Frequency& freq, int n_max) {
  if (n_max < 1) throw Error("diophantine_check: N_max must be >= 1");
  bool ok = true;
  for_each_mode(freq.dim(), n_max, [&](const Mode& m) {
    if (!ok) return;
    const double lower = freq.kappa / std::pow(static_cast<double>(m.abs1()), freq.tau);
    if (dist_to_integers(freq.pairing(m)) <= lower) ok = false;
  });
  return ok;
}

RotationClassification rotation_diophantine_check(double rho, const Frequency& freq, double gamma,
                                                  double tau, int n_max) {
  if (n_max < 1) throw Error("rotation_diophantine_check: N_max must be >= 1");
  RotationClassification out;
  const double two_rho = 2.0 * rho;

  // rho = 0 (or 1/2): trivially rational, reported as m0 = 0.
  if (dist_to_integers(two_rho) <= 1e-10) {
    out.cls = RotationClass::rational;
    out.m0 = Mode();
    out.trivial_zero = true;
    return out;
  }
  std::optional<Mode> rational_site;
  for_each_mode(freq.dim(), n_max, [&](const Mode& m) {
    if (rational_site) return;  // first hit wins: |m|_1 then lexicographic order
    if (dist_to_integers(two_rho - freq.pairing(m)) <= 1e-10) rational_site = m;
  });
  if (rational_site) {
    out.cls = RotationClass::rational;
    out.m0 = *rational_site;
    return out;
  }
  bool dio = dist_to_integers(two_rho) > gamma;  // m = 0 term of Eq-(3)
  for_each_mode(freq.dim(), n_max, [&](const Mode& m) {
    if (!dio) return;
    const double lower = gamma / std::pow(m.abs1() + 1.0, tau);
    if (dist_to_integers(two_rho - freq.pairing(m)) <= lower) dio = false;
  });
  out.cls = dio ? RotationClass::diophantine : RotationClass::neither;
  return out;
}

Mat2c su11_transform(const Mat2c& x, Su11Direction direction) {
  return direction == Su11Direction::to_su11 ? su11_from_sl2(x) : sl2_from_su11(x);
}

}  // namespace kamred
