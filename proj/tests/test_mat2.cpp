#include "doctest.h"

#include <random>

#include "kamred/errors.hpp"
#include "kamred/mat2.hpp"

using namespace kamred;

namespace {
Mat2d random_sl2(std::mt19937& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Mat2d x;
  x << dist(rng), dist(rng), dist(rng), 0.0;
  x(1, 1) = -x(0, 0);
  return expm_traceless(x);
}
}  // namespace

TEST_CASE("spectral norm matches singular values") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  for (int t = 0; t < 50; ++t) {
    Mat2c m;
    m << Complex(dist(rng), dist(rng)), Complex(dist(rng), dist(rng)),
        Complex(dist(rng), dist(rng)), Complex(dist(rng), dist(rng));
    Eigen::JacobiSVD<Mat2c> svd(m);
    CHECK(spectral_norm(m) == doctest::Approx(svd.singularValues()(0)).epsilon(1e-12));
  }
}

TEST_CASE("exp/log closed forms invert each other") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> dist(-0.8, 0.8);
  for (int t = 0; t < 100; ++t) {
    Mat2d x;
    x << dist(rng), dist(rng), dist(rng), 0.0;
    x(1, 1) = -x(0, 0);
    const Mat2d a = expm_traceless(x);
    CHECK(std::abs(a.determinant() - 1.0) < 1e-12);
    const Mat2d back = logm_sl2(a);
    CHECK((back - x).norm() < 1e-10);
  }
}

TEST_CASE("logm refuses trace <= -2") {
  Mat2d a = -Mat2d::Identity();
  CHECK_THROWS_AS(logm_sl2(a), LogBranchError);
  Mat2d hyp;
  hyp << -2.0, 0.0, 0.0, -0.5;
  CHECK_THROWS_AS(logm_sl2(hyp), LogBranchError);
}

TEST_CASE("rho branch and orientation") {
  // Rotation by 0.3 turns: branch rho = 0.3, oriented = 0.3.
  const Mat2d r = rotation(0.3);
  CHECK(rho_of(r).real() == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(oriented_rho(r).real() == doctest::Approx(0.3).epsilon(1e-12));
  // Rotation by 0.7 turns = -0.3: branch still 0.3, oriented 0.7.
  const Mat2d r2 = rotation(0.7);
  CHECK(rho_of(r2).real() == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(oriented_rho(r2).real() == doctest::Approx(0.7).epsilon(1e-12));
  // Hyperbolic diag(2, 1/2): rho = i log(2)/2pi.
  Mat2d h;
  h << 2.0, 0.0, 0.0, 0.5;
  CHECK(rho_of(h).real() == doctest::Approx(0.0));
  CHECK(rho_of(h).imag() == doctest::Approx(std::log(2.0) / (2 * M_PI)).epsilon(1e-12));
  // Negative-trace hyperbolic: real part 1/2.
  Mat2d hn = -h;
  CHECK(rho_of(hn).real() == doctest::Approx(0.5));
}

TEST_CASE("eigenvalues of elliptic matrices are e^{+-2 pi i rho}") {
  std::mt19937 rng(3);
  for (int t = 0; t < 40; ++t) {
    const Mat2d a = random_sl2(rng);
    if (std::abs(a.trace()) >= 2.0 - 1e-6) continue;
    const Complex rho = rho_of(a);
    const Complex lam = std::exp(Complex(0, 2 * M_PI) * rho);
    const Eigen::Vector2cd ev = a.cast<Complex>().eigenvalues();
    const double d1 = std::min(std::abs(ev(0) - lam), std::abs(ev(1) - lam));
    CHECK(d1 < 1e-10);
  }
}

TEST_CASE("elliptic diagonalizer realizes the oriented rotation") {
  std::mt19937 rng(5);
  for (int t = 0; t < 60; ++t) {
    const Mat2d a = random_sl2(rng);
    if (std::abs(a.trace()) >= 2.0 - 1e-3) continue;
    const Mat2d c = elliptic_diagonalizer(a);
    CHECK(std::abs(c.determinant() - 1.0) < 1e-12);
    const Mat2d r = c.inverse() * a * c;
    const Mat2d expected = rotation(oriented_rho(a).real());
    CHECK((r - expected).norm() < 1e-9);
  }
}

TEST_CASE("su(1,1) transform matches the fixed-basis closed form") {
  // [[x, y+z], [y-z, -x]] -> [[iz, x-iy], [x+iy, -iz]]
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  for (int t = 0; t < 25; ++t) {
    const double x = dist(rng), y = dist(rng), z = dist(rng);
    Mat2c in;
    in << x, y + z, y - z, -x;
    Mat2c expect;
    expect << Complex(0, z), Complex(x, -y), Complex(x, y), Complex(0, -z);
    const Mat2c got = su11_from_sl2(in);
    CHECK((got - expect).norm() < 1e-12);
    CHECK((su11_from_sl2(Mat2c::Identity()) - Mat2c::Identity()).norm() < 1e-14);
    CHECK((sl2_from_su11(got) - in).norm() < 1e-13);
  }
}

TEST_CASE("su(1,1) image of sl(2,R) has the su(1,1) structure") {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int t = 0; t < 25; ++t) {
    Mat2c x;
    const double a = dist(rng), b = dist(rng), c = dist(rng);
    x << a, b, c, -a;
    const Mat2c im = su11_from_sl2(x);
    CHECK(std::abs(im(0, 0).real()) < 1e-12);                 // diagonal purely imaginary
    CHECK(std::abs(im(0, 0) + im(1, 1)) < 1e-12);             // traceless
    CHECK(std::abs(im(0, 1) - std::conj(im(1, 0))) < 1e-12);  // conjugate off-diagonal
  }
}

TEST_CASE("rotations diagonalize in the su(1,1) frame") {
  const double phi = 0.2345;
  const Mat2c d = su11_from_sl2(rotation(phi).cast<Complex>());
  CHECK(std::abs(d(0, 1)) < 1e-12);
  CHECK(std::abs(d(1, 0)) < 1e-12);
  CHECK(std::abs(d(0, 0) - std::polar(1.0, -2 * M_PI * phi)) < 1e-12);
}

TEST_CASE("schur unitary triangularizes with the chosen eigenvalue first") {
  std::mt19937 rng(19);
  for (int t = 0; t < 40; ++t) {
    const Mat2d a = random_sl2(rng);
    const Complex lam = std::exp(Complex(0, 2 * M_PI) * oriented_rho(a));
    const Mat2c a_su = su11_from_sl2(a.cast<Complex>());
    const Mat2c u = schur_unitary(a_su, lam);
    CHECK((u * u.adjoint() - Mat2c::Identity()).norm() < 1e-12);
    const Mat2c tri = u.adjoint() * a_su * u;
    CHECK(std::abs(tri(1, 0)) < 1e-10);
    CHECK(std::abs(tri(0, 0) - lam) < 1e-9);
  }
}
