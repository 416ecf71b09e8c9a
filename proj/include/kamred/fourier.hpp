#pragma once

#include <array>
#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kamred/mat2.hpp"

namespace kamred {

/// Integer mode index on the d-torus, d <= 3. Unused components stay zero.
struct Mode {
  std::array<int, 3> n{0, 0, 0};

  Mode() = default;
  explicit Mode(int n0) { n[0] = n0; }
  Mode(int n0, int n1) {
    n[0] = n0;
    n[1] = n1;
  }
  Mode(int n0, int n1, int n2) : n{n0, n1, n2} {}

  int operator[](int i) const { return n[i]; }
  int& operator[](int i) { return n[i]; }
  int abs1() const { return std::abs(n[0]) + std::abs(n[1]) + std::abs(n[2]); }
  Mode operator+(const Mode& o) const { return Mode(n[0] + o.n[0], n[1] + o.n[1], n[2] + o.n[2]); }
  Mode operator-() const { return Mode(-n[0], -n[1], -n[2]); }
  bool operator==(const Mode& o) const { return n == o.n; }
  bool operator<(const Mode& o) const { return n < o.n; }
  bool is_zero() const { return n[0] == 0 && n[1] == 0 && n[2] == 0; }
};

enum class Period { torus, double_torus };
enum class Algebra { sl2r, su11, gl2c };

/// Finitely supported Fourier series of a 2x2 matrix-valued map on T^d or
/// 2T^d. The angular convention is e^{2 pi i <nu, theta>} with frequency
/// nu = n on T^d and nu = n/2 on 2T^d (integer storage for half modes).
/// Values are immutable in spirit: every operation returns a new map.
class FourierMap {
 public:
  using Table = std::map<Mode, Mat2c>;

  FourierMap() = default;
  FourierMap(int dim, Period period, Algebra algebra = Algebra::gl2c)
      : dim_(dim), period_(period), algebra_(algebra) {}

  static FourierMap constant(int dim, const Mat2c& value, Period period = Period::torus,
                             Algebra algebra = Algebra::gl2c);
  static FourierMap zero(int dim, Period period = Period::torus, Algebra algebra = Algebra::gl2c);

  int dim() const { return dim_; }
  Period period() const { return period_; }
  Algebra algebra() const { return algebra_; }
  const Table& coeffs() const { return coeffs_; }
  bool empty() const { return coeffs_.empty(); }
  std::size_t size() const { return coeffs_.size(); }

  /// Largest |n|_1 present (0 for the zero map).
  int max_abs_mode() const;

  Mat2c coeff(const Mode& m) const;
  void set_coeff(const Mode& m, const Mat2c& value);
  void add_coeff(const Mode& m, const Mat2c& value);

  /// Drop entries below rel * (largest coefficient norm); 1e-16 is below
  /// double-precision relevance.
  void drop_small(double rel = 1e-16);

  /// Drop entries whose weighted contribution ||c|| e^{|n| h} falls below
  /// abs_floor; keeps strip norms meaningful after long product chains.
  void prune_weighted(double h, double abs_floor);

  /// Sum of e^{2 pi i <nu, theta>} terms.
  Mat2c evaluate(const Eigen::VectorXd& theta) const;
  Mat2c evaluate(double theta) const;  // d = 1 convenience
  /// Real part with a reality check (throws when the imaginary part exceeds
  /// 1e-9 * scale, which signals a broken conjugate symmetry).
  Mat2d evaluate_real(const Eigen::VectorXd& theta) const;

  /// Exact partition (T_N f, R_N f) by |n|_1 <= N.
  std::pair<FourierMap, FourierMap> truncate(int order) const;

  /// Weighted l1 bound sum ||c_n|| e^{|nu(n)|_1 h} for the sup norm on the
  /// width-h strip. Throws OverflowError when a term leaves the float range.
  double strip_norm(double h) const;

  /// C^k norm: max over multi-indices |k'|<=k of the grid sup (>=512 points
  /// per dimension) of the term-wise differentiated series.
  double ck_norm(int k, int grid_per_dim = 512) const;

  // -- algebra -------------------------------------------------------------

  FourierMap operator+(const FourierMap& o) const;
  FourierMap operator-(const FourierMap& o) const;
  FourierMap scaled(Complex factor) const;
  /// Pointwise product via coefficient convolution (exact on finite tables).
  FourierMap product(const FourierMap& o) const;
  /// theta -> f(theta + alpha); multiplies coefficients by e^{2 pi i <nu, alpha>}.
  FourierMap shifted(const Eigen::VectorXd& alpha) const;
  /// Constant conjugation W f W^{-1}, coefficientwise.
  FourierMap conjugated_by(const Mat2c& w) const;
  /// Coefficientwise adjugate: exact pointwise inverse when det == 1.
  FourierMap sl2_inverse() const;
  FourierMap transpose_conjugate() const;

  /// Promote T^d storage to 2T^d (modes double); identity if already 2T^d.
  FourierMap to_double_torus() const;
  /// Fold even 2T^d modes back to T^d; odd-mode mass must be below
  /// 1e-10 * scale (throws otherwise).
  FourierMap to_torus() const;

  /// Enforce f(-n) = conj(f(n)) (real-valued map) and optionally zero trace.
  FourierMap realified(bool traceless) const;

  Algebra algebra_tag() const { return algebra_; }
  void set_algebra(Algebra a) { algebra_ = a; }

 private:
  int dim_ = 1;
  Period period_ = Period::torus;
  Algebra algebra_ = Algebra::gl2c;
  Table coeffs_;

  double half_factor() const { return period_ == Period::double_torus ? 0.5 : 1.0; }
  friend FourierMap exp_series(const FourierMap&, double);
  friend FourierMap log_series(const FourierMap&, double);
};

/// exp of a matrix series by convolution powers; tol is the relative series
/// truncation target on the C0 bound.
FourierMap exp_series(const FourierMap& f, double tol = 1e-17);
/// log of a near-identity series (C0 distance to I below ~0.7 required).
FourierMap log_series(const FourierMap& g, double tol = 1e-17);

/// Q_w(theta) = R_{<w, theta>/2} as an exact two-mode map on 2T^d (degree w).
FourierMap half_rotation_map(int dim, const Mode& w);

/// Analytic-approximation parameters for the smoothing sequence.
struct ApproxParams {
  int k = 3;               ///< smoothness order used in the bounds
  double c_prime = 8.0;    ///< empirical Zehnder constant
  int cutoff(int j) const {  ///< sharp projection cutoff
    return static_cast<int>(std::ceil(j * std::log(j + 1.0))) + j;
  }
};

/// j-th analytic approximant: sharp Fourier projection to |n|_1 <= cutoff(j).
/// The construction depends only on j, never on params.k.
FourierMap smooth_approximate(const FourierMap& f, int j, const ApproxParams& params);

// -- JSON ------------------------------------------------------------------

/// {dim, period, convention:"2pi", coeffs:[{n:[...], re:[[..]], im:[[..]]}]},
/// bit-exact on round trip.
std::string fourier_to_json(const FourierMap& f);
FourierMap fourier_from_json(const std::string& text);

/// Scalar real-valued Fourier series on T^d (used for potentials).
struct ScalarSeries {
  int dim = 1;
  std::map<Mode, Complex> coeffs;

  double evaluate(const Eigen::VectorXd& theta) const;
  double evaluate(double theta) const;
  double sup_bound() const;  ///< sum of coefficient moduli
  int max_abs_mode() const;
  static ScalarSeries cosine(int dim = 1);  ///< 2 cos(2 pi theta_1)
};

}  // namespace kamred
