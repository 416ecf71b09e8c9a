#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kamred/cocycle.hpp"

namespace kamred {

/// Sampled real potential V = coupling * series.
struct Potential {
  ScalarSeries series;
  double coupling = 0.0;

  double value(const Eigen::VectorXd& theta) const { return coupling * series.evaluate(theta); }
  double value(double theta) const { return coupling * series.evaluate(theta); }
  double sup_bound() const { return std::abs(coupling) * series.sup_bound(); }

  /// Almost Mathieu potential 2 lambda cos(2 pi theta).
  static Potential amo(double lambda);
};

/// Schrodinger cocycle S_E^V = [[E - V, -1], [1, 0]] as a direct-map cocycle
/// (det == 1 by construction).
Cocycle schrodinger_cocycle(const Potential& v, const Frequency& freq, double energy);

/// Exact perturbation form S_E^V = S_E^0 e^{f} with f = V E_21 (nilpotent log).
struct SchrodingerPerturbation {
  Mat2d A;        ///< S_E^0
  FourierMap f;   ///< V(theta) E_21, sl(2,R)-valued
};
SchrodingerPerturbation schrodinger_perturbation(const Potential& v, double energy);

/// IDS via N = 1 - 2 rho, reduced to [0,1].
double ids(const Potential& v, const Frequency& freq, double energy, long n_iter);

/// Fraction of eigenvalues of the size-site Dirichlet truncation below E
/// (Sturm count on the tridiagonal matrix).
double counting_ids(const Potential& v, const Frequency& freq, double energy, int size,
                    double theta0 = 0.0);

struct SpectralSample {
  double E = 0.0;
  double rho = 0.0;   ///< in [0, 1/2]
  double ids = 0.0;   ///< in [0, 1]
  double lyap = 0.0;
  bool hyperbolic = false;
  std::optional<Mode> gap_label;
  bool edge_flag = false;
};

struct ScanOptions {
  long n_iter = 100000;
  long lyap_iter = 10000;
  int cert_grid = 1024;
  int cert_window = 200;
  int label_search = 20;     ///< |m|_1 bound for the label search
  double label_tol = 1e-4;
  int jobs = 1;              ///< worker threads across energies
};

std::vector<SpectralSample> scan_spectrum(const Potential& v, const Frequency& freq,
                                          const std::vector<double>& energies,
                                          const ScanOptions& opts = {});

/// Spectral gap located by the hyperbolicity certificate.
struct Gap {
  double lo = 0.0, hi = 0.0;
  std::optional<Mode> label;
  double rho = 0.0;  ///< locked rotation number inside the gap
};

/// Coarse scan plus bisection refinement of interior gap edges.
std::vector<Gap> detect_gaps(const Potential& v, const Frequency& freq, double e_min, double e_max,
                             int coarse_grid, double edge_tol, const ScanOptions& opts = {});

/// Spectrum indicator on a uniform energy grid.
struct SpectrumIndicator {
  double e0 = 0.0;  ///< energy of cell 0
  double de = 0.0;  ///< grid spacing
  std::vector<bool> in;

  static SpectrumIndicator interval(double lo, double hi, double de);
  static SpectrumIndicator cantor_middle_thirds(double lo, double hi, int depth, double de);
  static SpectrumIndicator from_gaps(double lo, double hi, const std::vector<Gap>& gaps,
                                     double de);
};

/// Measured homogeneity exponent: inf over marked E and eps in a 50-point
/// logarithmic sweep [resolution, diam] of |B cap (E-eps, E+eps)| / eps.
/// Throws EmptySpectrumError on an empty indicator and ConfigError when the
/// grid is coarser than resolution/10.
double homogeneity(const SpectrumIndicator& ind, double resolution);

struct InitialState {
  enum class Kind { delta, packet } kind = Kind::delta;
  double momentum = 0.0;  ///< packet center momentum, in turns
  double width = 10.0;    ///< packet Gaussian width in sites
  std::string describe() const;
};

struct TransportPoint {
  double T = 0.0;
  double velocity = 0.0;         ///< <X(T)>/T
  double timeavg_velocity = 0.0; ///< (1/T) int_0^T <S>(t) dt, exact in the eigenbasis
  double second_moment = 0.0;    ///< <X^2(T)>/T^2
  double speed = 0.0;            ///< sqrt(<X^2(T)>)/T
  double norm = 0.0;             ///< ||psi_T||
  double quadrature_check = 0.0; ///< literal trapezoid value when requested
};

struct TransportResult {
  int lattice_half_width = 0;
  std::vector<TransportPoint> points;
  std::string initial_state;
  /// Matrix elements of the time-averaged velocity operator on the
  /// 64-dimensional test subspace (largest requested T), when requested.
  std::optional<Eigen::MatrixXcd> q_block;
};

struct TransportOptions {
  bool compute_q_block = false;
  std::optional<double> quadrature_step;  ///< enable the trapezoid cross-check
};

/// Exact-diagonalization transport on the (2L+1)-site truncation.
/// Requires L >= 500 and max T <= L/4; throws BoundaryContaminationError when
/// wavepacket mass within 10 sites of an end exceeds 1e-6 at a requested T.
TransportResult transport_velocity(const Potential& v, const Frequency& freq, double theta,
                                   int lattice_half_width, const std::vector<double>& times,
                                   const InitialState& state, const TransportOptions& opts = {});

}  // namespace kamred
