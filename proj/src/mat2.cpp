#include "kamred/mat2.hpp"

#include <cmath>
#include <limits>

#include "kamred/errors.hpp"

namespace kamred {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

double spectral_norm(const Mat2c& m) {
  // Largest eigenvalue of m^H m from trace/det of the 2x2 Gram matrix.
  const Mat2c g = m.adjoint() * m;
  const double tr = g(0, 0).real() + g(1, 1).real();
  const double det = (g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0)).real();
  const double disc = std::max(0.0, tr * tr - 4.0 * det);
  return std::sqrt(std::max(0.0, 0.5 * (tr + std::sqrt(disc))));
}

double spectral_norm(const Mat2d& m) { return spectral_norm(Mat2c(m.cast<Complex>())); }

Mat2d rotation(double phi_turns) {
  const double c = std::cos(kTwoPi * phi_turns), s = std::sin(kTwoPi * phi_turns);
  Mat2d r;
  r << c, -s, s, c;
  return r;
}

namespace {

// exp(X) = cosh(w) I + sinh(w)/w X for traceless X with w^2 = x^2 + y z = -det X.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 2> expm_traceless_impl(const Eigen::Matrix<Scalar, 2, 2>& x) {
  using M = Eigen::Matrix<Scalar, 2, 2>;
  const Complex w2 = Complex(x(0, 0) * x(0, 0) + x(0, 1) * x(1, 0));
  const Complex w = std::sqrt(w2);
  Complex ch, shw;  // cosh(w), sinh(w)/w
  if (std::abs(w) < 1e-8) {
    ch = 1.0 + w2 / 2.0 + w2 * w2 / 24.0;
    shw = 1.0 + w2 / 6.0 + w2 * w2 / 120.0;
  } else {
    ch = std::cosh(w);
    shw = std::sinh(w) / w;
  }
  M out;
  if constexpr (std::is_same_v<Scalar, double>) {
    out = ch.real() * M::Identity() + shw.real() * x;
  } else {
    out = ch * M::Identity() + shw * x;
  }
  return out;
}

}  // namespace

Mat2d expm_traceless(const Mat2d& x) { return expm_traceless_impl<double>(x); }
Mat2c expm_traceless(const Mat2c& x) { return expm_traceless_impl<Complex>(x); }

Mat2d logm_sl2(const Mat2d& a) {
  const double mu = 0.5 * (a(0, 0) + a(1, 1));
  if (mu <= -1.0 + 5e-13) {
    throw LogBranchError("logm_sl2: trace <= -2, real logarithm refused");
  }
  // A = cosh(s) I + (sinh(s)/s) X with cosh(s) = mu; invert the scalar factor.
  double factor;  // s / sinh(s)
  if (mu > 1.0) {
    const double s = std::acosh(mu);
    factor = (s < 1e-8) ? 1.0 : s / std::sinh(s);
  } else {
    const double w = std::acos(std::min(1.0, std::max(-1.0, mu)));
    factor = (w < 1e-8) ? 1.0 : w / std::sin(w);
  }
  return factor * (a - mu * Mat2d::Identity());
}

Complex rho_of(const Mat2d& a) {
  const double half_tr = 0.5 * (a(0, 0) + a(1, 1));
  if (std::abs(half_tr) <= 1.0) {
    return Complex(std::acos(half_tr) / kTwoPi, 0.0);  // in [0, 1/2]
  }
  const double y = std::acosh(std::abs(half_tr)) / kTwoPi;
  // Positive trace: eigenvalues e^{\pm 2 pi y}; negative: -e^{\pm 2 pi y}.
  return half_tr > 0 ? Complex(0.0, y) : Complex(0.5, y);
}

Complex oriented_rho(const Mat2d& a) {
  Complex rho = rho_of(a);
  if (rho.imag() != 0.0 || rho.real() == 0.0 || rho.real() == 0.5) return rho;
  // Elliptic: sign of the rotation equals the sign of the lower-left entry of
  // S = (A - cos I)/sin, i.e. of a21.
  const double s21 = a(1, 0);
  if (s21 < 0.0) return Complex(1.0 - rho.real(), 0.0);
  return rho;
}

Mat2d elliptic_diagonalizer(const Mat2d& a) {
  const double c = 0.5 * (a(0, 0) + a(1, 1));
  if (std::abs(c) >= 1.0 - 1e-14) throw Error("elliptic_diagonalizer: matrix not elliptic");
  const double s = std::sqrt(1.0 - c * c);
  Mat2d j = (a - c * Mat2d::Identity()) / s;  // J^2 = -I
  // Columns (v, J v) conjugate A to R_{+rho}; when the plane structure J is
  // negatively oriented (a21 < 0) use -J, giving R_{1-rho} = R_{oriented}.
  if (j(1, 0) < 0.0) j = -j;
  // det [v, Jv] > 0 for every v; scan directions for the best-conditioned
  // det-normalized frame (cond = ||C||_F^2 / 2 when det C = 1).
  Mat2d best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 16; ++k) {
    const double t = M_PI * k / 16.0;
    const Vec2d v(std::cos(t), std::sin(t));
    Mat2d cmat;
    cmat.col(0) = v;
    cmat.col(1) = j * v;
    const double det = cmat.determinant();
    if (det <= 0.0) continue;
    cmat /= std::sqrt(det);
    const double cost = cmat.squaredNorm();
    if (cost < best_cost) {
      best_cost = cost;
      best = cmat;
    }
  }
  if (!std::isfinite(best_cost)) throw Error("elliptic_diagonalizer: orientation failure");
  return best;
}

const Mat2c& su11_basis() {
  static const Mat2c m = [] {
    Mat2c v;
    const Complex i(0.0, 1.0);
    v << 1.0, -i, 1.0, i;
    return Mat2c((1.0 / (1.0 + i)) * v);
  }();
  return m;
}

Mat2c su11_from_sl2(const Mat2c& x) {
  const Mat2c& m = su11_basis();
  return m * x * m.inverse();
}

Mat2c sl2_from_su11(const Mat2c& x) {
  const Mat2c& m = su11_basis();
  return m.inverse() * x * m;
}

Mat2c schur_unitary(const Mat2c& s, Complex lambda_first) {
  // Unit eigenvector for lambda_first, completed to a unitary basis.
  const Mat2c b = s - lambda_first * Mat2c::Identity();
  // Kernel direction of b: pick the larger row to avoid cancellation.
  Eigen::Vector2cd v;
  const double r0 = std::abs(b(0, 0)) + std::abs(b(0, 1));
  const double r1 = std::abs(b(1, 0)) + std::abs(b(1, 1));
  if (r0 >= r1 && r0 > 0) {
    v << -b(0, 1), b(0, 0);
  } else if (r1 > 0) {
    v << -b(1, 1), b(1, 0);
  } else {
    v << 1.0, 0.0;
  }
  v.normalize();
  Eigen::Vector2cd w(-std::conj(v(1)), std::conj(v(0)));
  Mat2c u;
  u.col(0) = v;
  u.col(1) = w;
  return u;  // u^H s u is upper triangular with lambda_first at (0,0)
}

}  // namespace kamred
