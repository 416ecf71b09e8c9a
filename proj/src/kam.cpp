#include "kamred/kam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kamred/errors.hpp"
#include "nlohmann/json.hpp"

namespace kamred {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Strip norm that degrades to the C0 bound (with a warning) on overflow.
double safe_strip_norm(const FourierMap& f, double h, std::vector<std::string>* warnings) {
  try {
    return f.strip_norm(h);
  } catch (const OverflowError&) {
    if (warnings) warnings->push_back("strip norm overflow at h, fell back to C0 bound");
    return f.strip_norm(0.0);
  }
}

}  // namespace

double KamSchedule::l(int j) const {
  // Real-valued ladder: integerizing l_j collapses consecutive radii for any
  // desk-scale M (the growth per stage is below one), so the rounded value
  // serves only as the approximant index.
  return std::pow(static_cast<double>(M), std::pow(1.0 + s, j - 1));
}

int KamSchedule::l_index(int j) const { return static_cast<int>(std::floor(l(j))) + (std::abs(l(j) - std::round(l(j))) < 1e-9 ? 0 : 1); }

double KamSchedule::eps_formula(double m, double a_norm) const {
  return c / (std::pow(2.0 * a_norm, D_tilde) * std::pow(m, D * tau + 0.5));
}

std::vector<std::string> KamSchedule::violations() const {
  std::vector<std::string> v;
  if (!(sigma > 0.0 && sigma < 1.0 / 6.0)) v.push_back("sigma in (0, 1/6)");
  if (!(D > 2.0 / sigma)) v.push_back("D > 2/sigma");
  if (!(D_tilde > 0.0)) v.push_back("D_tilde > 0");
  if (!(c > 0.0)) v.push_back("c > 0");
  if (!(s > 0.0 && s <= 1.0 / (6.0 * D * tau + 3.0))) v.push_back("s in (0, 1/(6 D tau + 3)]");
  if (!(M >= 2)) v.push_back("M >= 2");
  if (!(k > (D + 2) * tau + 2.0)) v.push_back("k > (D+2) tau + 2");
  if (!(k0 <= (k - 10.0 * tau - 3.0) / (1.0 + s))) v.push_back("k0 <= (k - 10 tau - 3)/(1+s)");
  if (!(j_max >= 1)) v.push_back("j_max >= 1");
  if (!(kappa > 0.0)) v.push_back("kappa > 0");
  if (!(tau >= 1.0)) v.push_back("tau >= 1");
  return v;
}

void KamSchedule::validate() const {
  const auto v = violations();
  if (!v.empty()) throw ConfigError("KamSchedule: violated " + v.front());
}

std::optional<Mode> find_resonance(Complex rho, const Frequency& freq, int order, double eps,
                                   double sigma, double cap) {
  if (order < 1) throw Error("find_resonance: N must be >= 1");
  if (!(eps > 0.0 && eps < 1.0)) throw Error("find_resonance: eps must be in (0,1)");
  const double threshold = std::min(std::pow(eps, sigma), cap);
  const double im2 = std::abs(2.0 * rho.imag());
  if (im2 >= threshold) return std::nullopt;  // hyperbolic beyond reach

  const double re2 = 2.0 * rho.real();
  std::optional<Mode> best;
  double best_dist = std::numeric_limits<double>::infinity();
  int best_abs = std::numeric_limits<int>::max();

  auto consider = [&](const Mode& m) {
    const double d = std::hypot(dist_to_integers(re2 - freq.pairing(m)), im2);
    const int a = m.abs1();
    if (d < best_dist - 1e-18 || (std::abs(d - best_dist) <= 1e-18 &&
                                  (a < best_abs || (a == best_abs && best && m < *best)))) {
      best = m;
      best_dist = d;
      best_abs = a;
    }
  };
  // Enumerate 0 < |m|_1 <= order (d <= 3).
  const int dim = freq.dim();
  if (dim == 1) {
    for (int r = 1; r <= order; ++r) {
      consider(Mode(-r));
      consider(Mode(r));
    }
  } else if (dim == 2) {
    for (int a = -order; a <= order; ++a)
      for (int b = -(order - std::abs(a)); b <= order - std::abs(a); ++b)
        if (a != 0 || b != 0) consider(Mode(a, b));
  } else {
    for (int a = -order; a <= order; ++a)
      for (int b = -(order - std::abs(a)); b <= order - std::abs(a); ++b)
        for (int c = -(order - std::abs(a) - std::abs(b));
             c <= order - std::abs(a) - std::abs(b); ++c)
          if (a != 0 || b != 0 || c != 0) consider(Mode(a, b, c));
  }
  // Strict inequality, with a relative guard so a distance landing exactly on
  // the threshold (up to rounding) counts as non-resonant.
  if (best && best_dist < threshold * (1.0 - 1e-12)) return best;
  return std::nullopt;
}

namespace {

/// Triangular su(1,1)-reduced frame of a constant cocycle: W X W^{-1} carries
/// sl(2,R) data into the frame where A is [[lambda, p], [0, 1/lambda]].
struct TriangularFrame {
  Mat2c W;      // frame map
  Mat2c W_inv;
  Complex lambda;
  Complex p;
};

TriangularFrame triangular_frame(const ConstantCocycle& a) {
  TriangularFrame fr;
  const Complex rho = a.oriented();
  fr.lambda = std::exp(Complex(0.0, kTwoPi) * rho);
  const Mat2c a_su = su11_from_sl2(a.A.cast<Complex>());
  const Mat2c u = schur_unitary(a_su, fr.lambda);
  const Mat2c t = u.adjoint() * a_su * u;
  fr.p = t(0, 1);
  fr.W = u.adjoint() * su11_basis();
  fr.W_inv = su11_basis().inverse() * u;
  return fr;
}

/// Diagonal frame for elliptic A through the real normal form: the frame map
/// is W = M C^{-1} with C^{-1} A C = R_rho. The su(1,1) basis sends R_rho to
/// diag(e^{-2 pi i rho}, e^{+2 pi i rho}), so lambda_first carries the
/// negative angle.
struct DiagonalFrame {
  Mat2c W;
  Mat2c W_inv;
  Mat2d C;  // real diagonalizer
  Complex lambda_first;
  Complex rho;  // oriented angle of A
};

DiagonalFrame diagonal_frame(const ConstantCocycle& a) {
  DiagonalFrame fr;
  fr.rho = a.oriented();
  if (fr.rho.imag() != 0.0) throw Error("diagonal_frame: matrix not elliptic");
  fr.lambda_first = std::exp(Complex(0.0, -kTwoPi) * fr.rho);
  fr.C = elliptic_diagonalizer(a.A);
  fr.W = su11_basis() * fr.C.inverse().cast<Complex>();
  fr.W_inv = fr.C.cast<Complex>() * su11_basis().inverse();
  return fr;
}

double phase_of_mode(const Frequency& freq, const Mode& n) { return freq.pairing(n); }

}  // namespace

FourierMap solve_cohomological(const ConstantCocycle& A, const FourierMap& g,
                               const Frequency& freq, double* divisor_min) {
  if (g.period() != Period::torus) throw Error("solve_cohomological: g must live on T^d");
  const double scale = std::max(g.strip_norm(0.0), 1e-300);
  if (spectral_norm(g.coeff(Mode())) > 1e-12 * scale) {
    throw Error("solve_cohomological: g must have zero mean");
  }

  const TriangularFrame fr = triangular_frame(A);
  const Complex lambda = fr.lambda, p = fr.p;
  const FourierMap g_tri = g.conjugated_by(fr.W);

  double min_div = std::numeric_limits<double>::infinity();
  auto divide = [&](Complex num, Complex div) {
    const double mag = std::abs(div);
    min_div = std::min(min_div, mag);
    if (mag < 1e-13) {
      throw SmallDivisorError("solve_cohomological: divisor " + std::to_string(mag) +
                              " below floor (unremoved resonance)");
    }
    return num / div;
  };

  FourierMap y_tri(g.dim(), Period::torus, Algebra::gl2c);
  for (const auto& [n, c] : g_tri.coeffs()) {
    if (n.is_zero()) continue;
    const Complex e_n = std::polar(1.0, kTwoPi * phase_of_mode(freq, n));
    const Complex g1 = c(0, 0), g2 = c(0, 1), g3 = c(1, 0), g4 = c(1, 1);
    // Four scalar equations of the triangular cascade; the off-diagonal
    // divisors carry e^{+-2 i rho}, the diagonal ones only <n, alpha>.
    const Complex y3 = divide(-g3, lambda * lambda * e_n - 1.0);
    const Complex y1 = divide((p / lambda) * (y3 - g3) - g1, e_n - 1.0);
    const Complex y4 = divide(-g4 - lambda * p * e_n * y3, e_n - 1.0);
    const Complex y2 =
        divide(-lambda * g2 - p * g4 - p * e_n * y1 + p * y4, e_n / lambda - lambda);
    Mat2c y;
    y << y1, y2, y3, y4;
    y_tri.set_coeff(n, y);
  }
  if (divisor_min) *divisor_min = std::isfinite(min_div) ? min_div : 1.0;
  return y_tri.conjugated_by(fr.W_inv).realified(/*traceless=*/true);
}

namespace {

/// Divisor of the twisted difference operator on component (i,j) at mode n in
/// the diagonal frame: lambda_i^{-1} lambda_j e_n - 1.
Complex space_divisor(Complex lambda, int i, int j, Complex e_n) {
  const Complex l1 = lambda, l2 = 1.0 / lambda;
  const Complex li = (i == 0) ? l1 : l2;
  const Complex lj = (j == 0) ? l1 : l2;
  return (lj / li) * e_n - 1.0;
}

struct EliminationResult {
  FourierMap y_diag;     // total Y in the diagonal frame
  FourierMap g_re_diag;  // resonant remainder in the diagonal frame
  int sweeps = 0;
};

EliminationResult eliminate_in_diag_frame(const DiagonalFrame& fr, const FourierMap& g_diag,
                                          double eta, const Frequency& freq) {
  const double scale = std::max(g_diag.strip_norm(0.0), 1e-300);
  // Floor at the convolution noise level of the unit-size constants.
  const double tol = std::max(1e-12 * scale, 2e-15);
  const Mat2c d_const = (Mat2c() << fr.lambda_first, 0.0, 0.0, std::conj(fr.lambda_first)).finished();
  const FourierMap dmap = FourierMap::constant(g_diag.dim(), d_const);
  const FourierMap dinv =
      FourierMap::constant(g_diag.dim(), (Mat2c() << 1.0 / fr.lambda_first, 0.0, 0.0,
                                          Complex(1.0, 0.0) / std::conj(fr.lambda_first))
                                             .finished());

  FourierMap g_cur = g_diag;
  FourierMap b_total = FourierMap::constant(g_diag.dim(), Mat2c::Identity());
  EliminationResult out;
  for (int sweep = 1; sweep <= 64; ++sweep) {
    // Split modes componentwise by the eta criterion of the space decomposition.
    FourierMap y(g_cur.dim(), Period::torus, Algebra::gl2c);
    double nre_mass = 0.0;
    for (const auto& [n, c] : g_cur.coeffs()) {
      const Complex e_n = std::polar(1.0, kTwoPi * freq.pairing(n));
      Mat2c ycoef = Mat2c::Zero();
      bool any = false;
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
          if (c(i, j) == Complex(0.0, 0.0)) continue;
          const Complex div = space_divisor(fr.lambda_first, i, j, e_n);
          if (std::abs(div) >= eta) {
            ycoef(i, j) = -c(i, j) / div;
            nre_mass += std::abs(c(i, j));
            any = true;
          }
        }
      }
      if (any) y.set_coeff(n, ycoef);
    }
    if (nre_mass <= tol) {
      out.g_re_diag = g_cur;
      break;
    }
    const FourierMap e_plus = exp_series(y.shifted(freq.alpha));
    const FourierMap e_minus = exp_series(y.scaled(-1.0));
    const FourierMap conjugated =
        dinv.product(e_plus).product(dmap).product(exp_series(g_cur)).product(e_minus);
    g_cur = log_series(conjugated);
    b_total = exp_series(y).product(b_total);
    b_total.drop_small();
    out.sweeps = sweep;
    if (sweep == 64) {
      throw NonConvergenceError("eliminate_nonresonant: no convergence after 64 sweeps");
    }
  }
  out.g_re_diag = g_cur;
  out.y_diag = log_series(b_total);
  return out;
}

}  // namespace

std::pair<FourierMap, FourierMap> eliminate_nonresonant(const ConstantCocycle& A,
                                                        const FourierMap& g, double eta, double r,
                                                        const Frequency& freq, KamEstimates* est) {
  const DiagonalFrame fr = diagonal_frame(A);
  const FourierMap g_diag = g.conjugated_by(fr.W);
  EliminationResult res = eliminate_in_diag_frame(fr, g_diag, eta, freq);
  FourierMap y = res.y_diag.conjugated_by(fr.W_inv).realified(true);
  FourierMap g_re = res.g_re_diag.conjugated_by(fr.W_inv).realified(true);
  if (est) {
    est->y_norm = safe_strip_norm(y, r, &est->warnings);
  }
  return {std::move(y), std::move(g_re)};
}

namespace {

/// Sampled residual of B(.+alpha) (A e^{f}) B^{-1} = A_+ e^{f_+} on 256 phases.
double conjugation_residual(const FourierMap& b, const Mat2d& a, const FourierMap& f,
                            const Mat2d& a_plus, const FourierMap& f_plus,
                            const Frequency& freq) {
  double worst = 0.0;
  const int n_samples = 256;
  for (int k = 0; k < n_samples; ++k) {
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(freq.dim());
    theta[0] = (freq.dim() >= 1) ? (2.0 * k / n_samples) : 0.0;
    if (freq.dim() > 1) theta += (static_cast<double>(k) / n_samples) * freq.alpha;
    const Mat2c bv = b.evaluate(theta + freq.alpha);
    const Mat2c bv0 = b.evaluate(theta);
    const Mat2c lhs = bv * a.cast<Complex>() *
                      expm_traceless(Mat2c(f.evaluate(theta))) * bv0.inverse();
    const Mat2c rhs =
        a_plus.cast<Complex>() * expm_traceless(Mat2c(f_plus.evaluate(theta)));
    worst = std::max(worst, spectral_norm(Mat2c(lhs - rhs)));
  }
  return worst;
}

void enforce_contract(const char* name, double measured, double bound, KamEstimates& est) {
  if (measured > 4.0 * bound) {
    throw ContractViolationError(std::string("kam step contract '") + name + "' violated: " +
                                     std::to_string(measured) + " > 4 * " +
                                     std::to_string(bound),
                                 measured, bound);
  }
  if (measured > bound) {
    est.warnings.push_back(std::string(name) + " exceeds the exact bound (within slack 4)");
  }
}

Mat2d renormalize_det(const Mat2d& a) {
  const double det = a.determinant();
  if (det <= 0.0) throw Error("kam step: constant part lost positive determinant");
  return a / std::sqrt(det);
}

}  // namespace

KamStepResult nonresonant_step(const ConstantCocycle& A, const FourierMap& f, double r,
                               double r_prime, double eps, const KamSchedule& sched,
                               const Frequency& freq) {
  KamStepResult out;
  out.step_case = StepCase::nonresonant;
  const int n_trunc = std::max(1, static_cast<int>(std::ceil(
                                      2.0 / (r - r_prime) * std::abs(std::log(eps)))));
  out.estimates.N = n_trunc;

  auto [low, high] = f.truncate(n_trunc);
  FourierMap g = low;
  const Mat2c mean = g.coeff(Mode());
  g.set_coeff(Mode(), Mat2c::Zero());

  FourierMap y(f.dim(), Period::torus, Algebra::sl2r);
  if (!g.empty()) {
    y = solve_cohomological(A, g, freq, &out.estimates.divisor_min);
  }
  const FourierMap b = exp_series(y);
  const Mat2d a_plus = renormalize_det(A.A * expm_traceless(Mat2d(mean.real())));

  const FourierMap whole =
      FourierMap::constant(f.dim(), A.A.cast<Complex>()).product(exp_series(f));
  const FourierMap conj =
      b.shifted(freq.alpha).product(whole).product(exp_series(y.scaled(-1.0)));
  FourierMap f_plus =
      log_series(FourierMap::constant(f.dim(), a_plus.inverse().cast<Complex>()).product(conj))
          .realified(true);
  f_plus.set_algebra(Algebra::sl2r);
  f_plus.prune_weighted(r_prime, 1e-17 * std::max(f_plus.strip_norm(0.0), 1e-300));

  out.estimates.y_norm = safe_strip_norm(y, r_prime, &out.estimates.warnings);
  const FourierMap b_minus_id =
      b - FourierMap::constant(f.dim(), Mat2c::Identity());
  out.estimates.b_minus_id = safe_strip_norm(b_minus_id, r_prime, &out.estimates.warnings);
  out.estimates.b_strip = safe_strip_norm(b, r_prime, &out.estimates.warnings);
  out.estimates.b_c0 = b.strip_norm(0.0);
  out.estimates.f_plus_strip = safe_strip_norm(f_plus, r_prime, &out.estimates.warnings);
  out.estimates.a_change = spectral_norm(Mat2d(a_plus - A.A));

  const double dfrac = 8.0 / sched.D;
  enforce_contract("|B-Id|_{r'} <= eps^{1-8/D}", out.estimates.b_minus_id,
                   std::pow(eps, 1.0 - dfrac), out.estimates);
  enforce_contract("|f_+|_{r'} <= eps^{2-8/D}", out.estimates.f_plus_strip,
                   std::pow(eps, 2.0 - dfrac), out.estimates);
  enforce_contract("||A_+ - A|| <= 2||A|| eps", out.estimates.a_change, 2.0 * A.norm() * eps,
                   out.estimates);

  out.estimates.conj_residual =
      conjugation_residual(b, A.A, f, a_plus, f_plus, freq);
  out.B.map = b.to_double_torus();
  out.B.degree = Eigen::VectorXi::Zero(f.dim());
  out.A_plus = ConstantCocycle(a_plus);
  out.f_plus = std::move(f_plus);
  return out;
}

KamStepResult resonant_step(const ConstantCocycle& A, const FourierMap& f, const Mode& m_star,
                            double r, double r_prime, double eps, const KamSchedule& sched,
                            const Frequency& freq) {
  KamStepResult out;
  out.step_case = StepCase::resonant;
  out.resonance_site = m_star;
  const int n_trunc = std::max(1, static_cast<int>(std::ceil(
                                      2.0 / (r - r_prime) * std::abs(std::log(eps)))));
  out.estimates.N = n_trunc;

  const double eta = std::min(13.0 * A.norm() * A.norm() * std::sqrt(eps), 0.5);
  const DiagonalFrame fr = diagonal_frame(A);
  const FourierMap g_diag = f.conjugated_by(fr.W);
  EliminationResult elim = eliminate_in_diag_frame(fr, g_diag, eta, freq);

  // Designated resonant slots in the diagonal frame (lambda_first carries
  // -rho): upper-right lives at mode -m*, lower-left at +m*, diagonal at 0.
  const Mat2c c0 = elim.g_re_diag.coeff(Mode());
  const Complex it(0.0, 0.5 * (c0(0, 0).imag() - c0(1, 1).imag()));
  const Complex v = 0.5 * (elim.g_re_diag.coeff(-m_star)(0, 1) +
                           std::conj(elim.g_re_diag.coeff(m_star)(1, 0)));
  out.estimates.resonant_t = std::abs(it.imag());
  out.estimates.resonant_v = std::abs(v);

  // Rotation removal Q = R_{-<m*,theta>/2} (degree -m*, rho drops by
  // <m*,alpha>/2); the constant absorbs the su(1,1) content of the slots.
  const Complex lam_q = std::polar(1.0, M_PI * freq.pairing(m_star));
  Mat2c w_const;
  w_const << it, v, std::conj(v), -it;
  Mat2c a_plus_su = (Mat2c() << fr.lambda_first * lam_q, 0.0, 0.0,
                     std::conj(fr.lambda_first) * std::conj(lam_q))
                        .finished() *
                    expm_traceless(w_const);
  const Mat2c a_plus_c = sl2_from_su11(a_plus_su);
  Mat2d a_plus = renormalize_det(a_plus_c.real());

  // Full conjugation B = Q * C^{-1} * e^{Y} in the real frame, all exact series.
  const FourierMap y_real = elim.y_diag.conjugated_by(fr.W_inv).realified(true);
  const FourierMap b_elim = exp_series(y_real);
  const Mat2d c_inv = fr.C.inverse();
  const FourierMap q_real = half_rotation_map(f.dim(), -m_star);
  FourierMap b_total = q_real.product(
      FourierMap::constant(f.dim(), c_inv.cast<Complex>()).product(b_elim));
  b_total.drop_small();

  const FourierMap whole =
      FourierMap::constant(f.dim(), A.A.cast<Complex>()).product(exp_series(f));
  const FourierMap conj = b_total.shifted(freq.alpha)
                              .product(whole.to_double_torus())
                              .product(b_total.sl2_inverse());
  FourierMap f_plus =
      log_series(
          FourierMap::constant(f.dim(), a_plus.inverse().cast<Complex>(), Period::double_torus)
              .product(conj))
          .realified(true)
          .to_torus();
  f_plus.set_algebra(Algebra::sl2r);
  f_plus.prune_weighted(r_prime, 1e-17 * std::max(f_plus.strip_norm(0.0), 1e-300));

  // Records against the resonant-case bounds. Sites with an odd integer part
  // of 2 rho - <m*, alpha> land the constant near -Id, where A'' is the log
  // of the sign-corrected matrix (-e^X also lies in SL(2,R)).
  Mat2d a_for_log = a_plus;
  if (a_plus(0, 0) + a_plus(1, 1) < 0.0) {
    a_for_log = -a_plus;
    out.estimates.warnings.push_back("odd-parity site: A'' recorded for -A_+");
  }
  const Mat2d a_second = logm_sl2(a_for_log);
  out.estimates.a_change = spectral_norm(a_second);
  out.estimates.y_norm = safe_strip_norm(y_real, r, &out.estimates.warnings);
  out.estimates.b_strip = safe_strip_norm(b_total, r_prime, &out.estimates.warnings);
  out.estimates.b_c0 = b_total.strip_norm(0.0);
  out.estimates.f_plus_strip = safe_strip_norm(f_plus, r_prime, &out.estimates.warnings);

  const double sigma = sched.sigma;
  enforce_contract("||A''|| <= 2 eps^sigma", out.estimates.a_change, 2.0 * std::pow(eps, sigma),
                   out.estimates);
  enforce_contract("|t| <= eps^sigma", out.estimates.resonant_t, std::pow(eps, sigma),
                   out.estimates);
  const double ln_eps = std::abs(std::log(eps));
  const double v_bound = std::pow(2.0, 4.0 + sched.tau) * A.norm() * std::pow(ln_eps, sched.tau) /
                         (sched.kappa * std::pow(r - r_prime, sched.tau)) * eps *
                         std::exp(-m_star.abs1() * r);
  enforce_contract("resonant |v| decay bound", out.estimates.resonant_v, v_bound, out.estimates);
  const double b_strip_bound = 8.0 * std::sqrt(A.norm() / sched.kappa) *
                               std::pow(2.0 / (r - r_prime) * ln_eps, sched.tau / 2.0) *
                               std::pow(eps, -r_prime / (r - r_prime));
  const double b_c0_bound = 8.0 * std::sqrt(A.norm() / sched.kappa) *
                            std::pow(2.0 / (r - r_prime) * ln_eps, sched.tau / 2.0);
  enforce_contract("|B|_{r'} resonant bound", out.estimates.b_strip, b_strip_bound,
                   out.estimates);
  enforce_contract("||B||_0 resonant bound", out.estimates.b_c0, b_c0_bound, out.estimates);

  {
    // Sampled conjugation identity on the doubled torus.
    double worst = 0.0;
    for (int kk = 0; kk < 256; ++kk) {
      Eigen::VectorXd theta = Eigen::VectorXd::Zero(f.dim());
      theta[0] = 2.0 * kk / 256.0;
      if (f.dim() > 1) theta += (static_cast<double>(kk) / 256.0) * freq.alpha;
      const Mat2c lhs = b_total.evaluate(theta + freq.alpha) * A.A.cast<Complex>() *
                        expm_traceless(Mat2c(f.evaluate(theta))) *
                        b_total.evaluate(theta).inverse();
      const Mat2c rhs = a_plus.cast<Complex>() *
                        expm_traceless(Mat2c(f_plus.evaluate(theta)));
      worst = std::max(worst, spectral_norm(Mat2c(lhs - rhs)));
    }
    out.estimates.conj_residual = worst;
  }

  out.B.map = b_total;
  out.B.degree = Eigen::VectorXi::Zero(f.dim());
  for (int i = 0; i < f.dim(); ++i) out.B.degree[i] = -m_star[i];
  out.A_plus = ConstantCocycle(a_plus);
  out.f_plus = std::move(f_plus);
  return out;
}

namespace {

/// The resonant pipeline moves every eta-resonant slot into the new constant
/// through the site translation; slots other than the designated ones would
/// ride untreated into f_+ and wreck the contraction. Dispatch is therefore
/// allowed only when the eta split is clean over the perturbation's support.
bool elimination_is_rider_free(const ConstantCocycle& a, const FourierMap& f, const Mode& m_star,
                               double eta, const Frequency& freq) {
  if (a.oriented().imag() != 0.0) return false;
  const Complex lambda_first = std::exp(Complex(0.0, -kTwoPi) * a.oriented());
  std::vector<Mode> modes;
  for (const auto& [n, c] : f.coeffs()) modes.push_back(n);
  modes.push_back(m_star);
  modes.push_back(-m_star);
  for (const Mode& n : modes) {
    const Complex e_n = std::polar(1.0, kTwoPi * freq.pairing(n));
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        if (i == j && n.is_zero()) continue;            // mean goes to the constant
        if (i == 0 && j == 1 && n == -m_star) continue;  // designated slots
        if (i == 1 && j == 0 && n == m_star) continue;
        if (i != j && std::abs(space_divisor(lambda_first, i, j, e_n)) < eta) return false;
        if (i == j && !n.is_zero() &&
            std::abs(space_divisor(lambda_first, i, j, e_n)) < eta) {
          return false;
        }
      }
    }
  }
  return true;
}

}  // namespace

KamStepResult kam_step(const ConstantCocycle& A, const FourierMap& f, double r, double r_prime,
                       double eps, const KamSchedule& sched, const Frequency& freq) {
  const int n_formula = std::max(1, static_cast<int>(std::ceil(
                                        2.0 / (r - r_prime) * std::abs(std::log(eps)))));
  const int n_scan = std::min(n_formula, std::max(f.max_abs_mode(), 24));
  const std::optional<Mode> site =
      find_resonance(A.oriented(), freq, n_scan, eps, sched.sigma, sched.resonance_cap);
  if (site) {
    const double eta = std::min(13.0 * A.norm() * A.norm() * std::sqrt(eps), 0.5);
    if (elimination_is_rider_free(A, f, *site, eta, freq)) {
      return resonant_step(A, f, *site, r, r_prime, eps, sched, freq);
    }
    KamStepResult out = nonresonant_step(A, f, r, r_prime, eps, sched, freq);
    out.estimates.warnings.push_back("resonance deferred: eta split not rider-free yet");
    return out;
  }
  return nonresonant_step(A, f, r, r_prime, eps, sched, freq);
}

namespace {

FourierMap reconjugate_remainder(const FourierMap& b_cum, const Mat2d& a0,
                                 const FourierMap& f_target, const Mat2d& a_cur,
                                 const Frequency& freq) {
  const FourierMap whole = FourierMap::constant(f_target.dim(), a0.cast<Complex>())
                               .product(exp_series(f_target))
                               .to_double_torus();
  const FourierMap conj =
      b_cum.shifted(freq.alpha).product(whole).product(b_cum.sl2_inverse());
  FourierMap phi =
      log_series(FourierMap::constant(f_target.dim(), a_cur.inverse().cast<Complex>(),
                                      Period::double_torus)
                     .product(conj))
          .realified(true)
          .to_torus();
  phi.set_algebra(Algebra::sl2r);
  return phi;
}

}  // namespace

ReducibilityReport run_iteration(const ConstantCocycle& A, const FourierMap& f_ck,
                                 const Frequency& freq, const KamSchedule& sched,
                                 const RotClassParams& rot_params) {
  sched.validate();
  ReducibilityReport rep;
  rep.schedule = sched;
  rep.degree_final = Eigen::VectorXi::Zero(freq.dim());
  const double a0_norm = std::max(1.0, ConstantCocycle(A.A).norm());
  const ApproxParams approx{sched.k, 8.0};

  // Entry gate: measured first-stage strip norm against the configured bound.
  const double r1 = 1.0 / sched.l(1);
  FourierMap f_cur = smooth_approximate(f_ck, sched.l_index(1), approx);
  const double entry = f_cur.empty() ? 0.0 : f_cur.strip_norm(r1);
  if (entry > sched.eps_entry) {
    throw SmallnessError("run_iteration: entry smallness violated, |f_{l_1}|_{1/l_1} = " +
                         std::to_string(entry) + " > " + std::to_string(sched.eps_entry));
  }

  ConstantCocycle a_cur = A;
  FourierMap phi = f_cur;
  Conjugation b_cum = Conjugation::identity(freq.dim());
  double residual = phi.empty() ? 0.0 : phi.strip_norm(0.0);

  for (int j = 1; j <= sched.j_max; ++j) {
    const double r_j = 1.0 / sched.l(j);
    const double r_next = 1.0 / sched.l(j + 1);
    const double floor = sched.residual_floor_rel * (1.0 + a_cur.norm());
    if (residual <= floor) break;

    StageRecord rec;
    rec.j = j;
    rec.l_j = sched.l(j);
    rec.eps_formula = sched.eps_formula(rec.l_j, a0_norm);
    rec.eps_measured = safe_strip_norm(phi, r_j, &rep.warnings);

    KamStepResult step =
        kam_step(a_cur, phi, r_j, r_next, std::min(rec.eps_measured, 0.5), sched, freq);
    rec.step_case = step.step_case;
    rec.resonance_site = step.resonance_site;
    rec.estimates = step.estimates;

    b_cum.map = step.B.map.product(b_cum.map);
    b_cum.map.drop_small();
    if (step.step_case == StepCase::resonant) {
      rep.resonant_steps.push_back(j);
      for (int i = 0; i < freq.dim(); ++i) rep.degree_final[i] += (*step.resonance_site)[i];
    }
    a_cur = step.A_plus;
    phi = step.f_plus;

    // Absorb the next analytic approximant when the cutoff admits new modes.
    const FourierMap f_next = smooth_approximate(f_ck, sched.l_index(j + 1), approx);
    if (!(f_next - f_cur).empty()) {
      f_cur = f_next;
      phi = reconjugate_remainder(b_cum.map, A.A, f_cur, a_cur.A, freq);
    }
    residual = phi.empty() ? 0.0 : phi.strip_norm(0.0);
    rec.residual_c0 = residual;
    rep.steps.push_back(std::move(rec));
  }

  // Absorb any approximant tail the slow ladder never reached, provided it
  // sits below the achieved residual scale; otherwise the report refers to
  // the last approximant and says so.
  {
    const FourierMap tail = f_ck - f_cur;
    if (!tail.empty()) {
      const double tail_norm = tail.strip_norm(0.0);
      const double floor = sched.residual_floor_rel * (1.0 + a_cur.norm());
      if (tail_norm <= std::max(residual, floor)) {
        f_cur = f_ck;
        phi = reconjugate_remainder(b_cum.map, A.A, f_cur, a_cur.A, freq);
        residual = phi.empty() ? 0.0 : phi.strip_norm(0.0);
      } else {
        rep.warnings.push_back(
            "approximant ladder did not reach the input's high modes; residual refers to "
            "f_{l_jmax}");
      }
    }
  }

  // Normalize an elliptic final constant to its rotation form R_phi; the
  // constant conjugation has degree zero.
  if (std::abs(a_cur.A(0, 0) + a_cur.A(1, 1)) < 2.0 - 1e-9) {
    const Mat2d c_f = elliptic_diagonalizer(a_cur.A);
    if (c_f.squaredNorm() <= 1e3) {
      const Mat2d c_inv = c_f.inverse();
      b_cum.map = FourierMap::constant(freq.dim(), c_inv.cast<Complex>(), Period::double_torus)
                      .product(b_cum.map);
      a_cur = ConstantCocycle(rotation(oriented_rho(a_cur.A).real()));
      phi = phi.conjugated_by(c_inv.cast<Complex>()).realified(true);
      residual = phi.empty() ? 0.0 : phi.strip_norm(0.0);
    } else {
      rep.warnings.push_back("final elliptic normalization skipped (ill-conditioned)");
    }
  }

  rep.A_final = a_cur;
  rep.residual = residual;
  rep.B_final = b_cum;
  try {
    rep.B_final.degree = winding_degree_all(b_cum.map);
  } catch (const Error& e) {
    rep.warnings.push_back(std::string("winding of B_final unavailable: ") + e.what());
    rep.B_final.degree = -rep.degree_final;
  }

  // Classification through the scheme-refined rotation number.
  double deg_alpha = 0.0;
  for (int i = 0; i < freq.dim(); ++i) deg_alpha += rep.degree_final[i] * freq.alpha[i];
  rep.rho_refined = mod1(oriented_rho(a_cur.A).real() + 0.5 * deg_alpha);
  const RotationClassification cls = rotation_diophantine_check(
      rep.rho_refined, freq, rot_params.gamma, rot_params.tau, rot_params.n_max);
  switch (cls.cls) {
    case RotationClass::diophantine:
      rep.classification = Reducibility::diophantine;
      break;
    case RotationClass::rational:
      rep.classification = Reducibility::rational;
      rep.m0 = cls.m0;
      break;
    case RotationClass::neither:
      rep.classification = Reducibility::inconclusive;
      break;
  }
  if (residual > sched.residual_floor_rel * (1.0 + a_cur.norm()) * 10.0 &&
      rep.steps.size() == static_cast<std::size_t>(sched.j_max)) {
    rep.warnings.push_back("j_max reached before the residual floor");
  }

  try {
    const Cocycle original = f_ck.empty()
                                 ? Cocycle::make_constant(freq, A.A)
                                 : Cocycle::make_perturbed(freq, A.A, f_ck);
    rep.rho_estimated = rotation_number(original, 100000);
  } catch (const Error& e) {
    rep.warnings.push_back(std::string("rotation estimate unavailable: ") + e.what());
    rep.rho_estimated = rep.rho_refined;
  }
  return rep;
}

std::string report_to_json(const ReducibilityReport& rep) {
  nlohmann::json out;
  out["schema"] = "kamred.report.v1";
  switch (rep.classification) {
    case Reducibility::diophantine: out["classification"] = "diophantine"; break;
    case Reducibility::rational: out["classification"] = "rational"; break;
    case Reducibility::inconclusive: out["classification"] = "inconclusive"; break;
  }
  if (rep.classification == Reducibility::rational) {
    out["m0"] = {rep.m0[0], rep.m0[1], rep.m0[2]};
  }
  out["schedule"] = {{"sigma", rep.schedule.sigma}, {"D", rep.schedule.D},
                     {"D_tilde", rep.schedule.D_tilde}, {"c", rep.schedule.c},
                     {"s", rep.schedule.s}, {"M", rep.schedule.M},
                     {"tau", rep.schedule.tau}, {"kappa", rep.schedule.kappa},
                     {"k", rep.schedule.k}, {"k0", rep.schedule.k0},
                     {"j_max", rep.schedule.j_max},
                     {"resonance_cap", rep.schedule.resonance_cap},
                     {"eps_entry", rep.schedule.eps_entry}};
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : rep.steps) {
    nlohmann::json e;
    e["j"] = s.j;
    e["l_j"] = s.l_j;
    e["eps_formula"] = s.eps_formula;
    e["eps_measured"] = s.eps_measured;
    e["case"] = s.step_case == StepCase::resonant ? "resonant" : "nonresonant";
    if (s.resonance_site) {
      e["resonance_site"] = {(*s.resonance_site)[0], (*s.resonance_site)[1],
                             (*s.resonance_site)[2]};
    }
    e["residual_c0"] = s.residual_c0;
    e["norms"] = {{"N", s.estimates.N},
                  {"Y", s.estimates.y_norm},
                  {"B_minus_id", s.estimates.b_minus_id},
                  {"B_strip", s.estimates.b_strip},
                  {"B_c0", s.estimates.b_c0},
                  {"f_plus_strip", s.estimates.f_plus_strip},
                  {"A_change", s.estimates.a_change},
                  {"resonant_t", s.estimates.resonant_t},
                  {"resonant_v", s.estimates.resonant_v},
                  {"divisor_min", s.estimates.divisor_min},
                  {"conj_residual", s.estimates.conj_residual}};
    e["warnings"] = s.estimates.warnings;
    steps.push_back(std::move(e));
  }
  out["steps"] = std::move(steps);
  out["resonant_steps"] = rep.resonant_steps;
  out["degree_final"] = std::vector<int>(rep.degree_final.data(),
                                         rep.degree_final.data() + rep.degree_final.size());
  out["B_degree"] = std::vector<int>(rep.B_final.degree.data(),
                                     rep.B_final.degree.data() + rep.B_final.degree.size());
  out["B_modes"] = rep.B_final.map.size();
  out["A_final"] = {{rep.A_final.A(0, 0), rep.A_final.A(0, 1)},
                    {rep.A_final.A(1, 0), rep.A_final.A(1, 1)}};
  out["residual"] = rep.residual;
  out["rho_refined"] = rep.rho_refined;
  out["rho_estimated"] = rep.rho_estimated;
  out["warnings"] = rep.warnings;
  return out.dump(2);
}

}  // namespace kamred
