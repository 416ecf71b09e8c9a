#pragma once

#include <optional>
#include <variant>

#include "kamred/fourier.hpp"

namespace kamred {

/// Translation vector alpha with its Diophantine parameters. Construction
/// verifies rational independence up to |m|_1 <= 64 (distance to Z above 1e-9).
struct Frequency {
  Eigen::VectorXd alpha;
  double kappa = 0.2;
  double tau = 1.5;

  Frequency() = default;
  Frequency(Eigen::VectorXd alpha_, double kappa_, double tau_);
  static Frequency golden(double kappa_ = 0.2, double tau_ = 1.5);

  int dim() const { return static_cast<int>(alpha.size()); }
  /// <m, alpha> for an integer mode.
  double pairing(const Mode& m) const;
};

/// Symmetric distance of x to the nearest integer, in [0, 1/2].
double dist_to_integers(double x);
/// Representative of x mod 1 in [0, 1).
double mod1(double x);

/// Constant SL(2,R) cocycle matrix with its eigenvalue angle (turns).
/// Branch: Im rho >= 0, Re rho in [0, 1/2).
struct ConstantCocycle {
  Mat2d A = Mat2d::Identity();
  Complex rho{0.0, 0.0};

  ConstantCocycle() = default;
  explicit ConstantCocycle(const Mat2d& a);
  /// Orientation-aware angle (the rotation number of (alpha, A)).
  Complex oriented() const;
  double norm() const { return spectral_norm(A); }
};

/// Quasi-periodic SL(2,R) cocycle over the translation by alpha. Exactly one
/// of {constant, A e^{f} perturbation form, direct map} is active.
class Cocycle {
 public:
  static Cocycle make_constant(Frequency freq, const Mat2d& a);
  static Cocycle make_perturbed(Frequency freq, const Mat2d& a, FourierMap f_sl2r);
  static Cocycle make_direct(Frequency freq, FourierMap map);

  const Frequency& freq() const { return freq_; }
  int dim() const { return freq_.dim(); }
  bool is_constant() const { return kind_ == Kind::constant; }
  bool has_perturbation() const { return kind_ == Kind::perturbed; }
  const ConstantCocycle& constant_part() const { return constant_; }
  const FourierMap& perturbation() const;
  const FourierMap& direct_map() const;

  /// Map value at theta.
  Mat2d value(const Eigen::VectorXd& theta) const;
  Mat2d value(double theta) const;
  /// The full map as a Fourier series (exp series for the perturbed form).
  FourierMap as_fourier() const;

 private:
  enum class Kind { constant, perturbed, direct };
  Kind kind_ = Kind::constant;
  Frequency freq_;
  ConstantCocycle constant_;
  FourierMap map_;           // perturbation f (sl2r) or direct map
  mutable std::optional<FourierMap> cached_exp_;
};

/// SL(2,R)-valued conjugation on 2T^d with its winding degree.
struct Conjugation {
  FourierMap map;          ///< on 2T^d
  Eigen::VectorXi degree;  ///< winding of the first column per axis

  static Conjugation identity(int dim);
};

// -- operations ---------------------------------------------------------------

/// n-step transfer matrix A_n(theta); n = 0 gives I, negative n uses
/// A_{-n}(theta) = A_n(theta - n alpha)^{-1}.
Mat2d iterate(const Cocycle& c, const Eigen::VectorXd& theta, long n);
Mat2d iterate(const Cocycle& c, double theta, long n);

/// Fibered rotation number estimate in [0,1): Birkhoff average of lifted
/// angle increments of the projective action from theta0 = 0, v0 = (1,0),
/// Richardson-extrapolated over windows n and n/2. Throws NonConvergenceError
/// when the dyadic window averages differ by more than 10/n_iter.
double rotation_number(const Cocycle& c, long n_iter);

/// Winding of the angle of the first column of Z along coordinate circle
/// `axis` of 2T^d, sampled at >= 4096 points (one x4 refinement retry).
int winding_degree(const FourierMap& z, int axis, int samples = 4096);
Eigen::VectorXi winding_degree_all(const FourierMap& z);

/// Z(theta+alpha) c(theta) Z(theta)^{-1} as a direct-map cocycle.
Cocycle conjugate(const Cocycle& c, const Conjugation& z);

/// Top Lyapunov exponent: (1/n) log ||A_n||, renormalized every 32 steps,
/// averaged over >= 32 phases.
double lyapunov_exponent(const Cocycle& c, long n_iter, int phases = 32);

/// Exponential-dichotomy certificate data.
struct HyperbolicityCertificate {
  double margin = 0.0;          ///< min(rate margin, splitting margin)
  double rate = 0.0;            ///< min over grid of window growth rate
  double transversality = 0.0;  ///< min |sin angle(u, s)|
  bool hyperbolic = false;
};

HyperbolicityCertificate cone_certificate(const Cocycle& c, int grid = 1024, int window = 200);

/// True iff the cone-field criterion certifies exponential dichotomy with
/// margin >= 1e-6. Throws InconclusiveError for margins in (0, 1e-6).
bool is_uniformly_hyperbolic(const Cocycle& c);

/// Diophantine check of Eq-(2) type: dist(<m,alpha>, Z) > kappa/|m|^tau for
/// all 0 < |m|_1 <= n_max.
bool diophantine_check(const Frequency& freq, int n_max);

enum class RotationClass { diophantine, rational, neither };
struct RotationClassification {
  RotationClass cls = RotationClass::neither;
  Mode m0;            ///< rational witness (valid when cls == rational)
  bool trivial_zero = false;  ///< rho = 0 case, reported as m0 = 0
};

/// Classification of 2 rho against <m, alpha> mod Z: rational when some
/// |m0|_1 <= n_max matches within 1e-10 (smallest |m0|, lexicographic
/// tie-break), Diophantine when the gamma/(|m|+1)^tau bound holds throughout.
RotationClassification rotation_diophantine_check(double rho, const Frequency& freq, double gamma,
                                                  double tau, int n_max);

/// Conjugation by the fixed su(1,1) basis matrix M (or its inverse).
enum class Su11Direction { to_su11, to_sl2r };
Mat2c su11_transform(const Mat2c& x, Su11Direction direction);

}  // namespace kamred
