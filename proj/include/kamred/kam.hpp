#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kamred/cocycle.hpp"

namespace kamred {

/// Full parameter set of the iteration scheme. The defaults satisfy every
/// inequality below for d = 1, tau = 1.5.
struct KamSchedule {
  double sigma = 1.0 / 7.0;  ///< in (0, 1/6)
  int D = 15;                ///< > 2/sigma
  double D_tilde = 4.0;
  double c = 1e-3;
  double s = 1.0 / 140.0;  ///< in (0, 1/(6 D tau + 3)]
  int M = 2;               ///< base of the l_j ladder
  double tau = 1.5;
  double kappa = 0.2;
  int k = 28;  ///< > (D+2) tau + 2
  int k0 = 9;  ///< <= (k - 10 tau - 3)/(1+s); 10 would violate the bound
  int j_max = 12;

  double resonance_cap = 0.01;  ///< desk-scale ceiling on the eps^sigma threshold
  double eps_entry = 0.1;       ///< measured entry gate for |f_{l_1}|_{1/l_1}
  double residual_floor_rel = 1e-13;

  /// l_j = M^{(1+s)^{j-1}} (real-valued ladder for the stage radii).
  double l(int j) const;
  /// Integer approximant index [l_j]+1.
  int l_index(int j) const;
  /// eps_m = c / ((2 ||A||)^{D_tilde} m^{D tau + 1/2}).
  double eps_formula(double m, double a_norm) const;
  /// Names of violated schedule inequalities (empty when valid).
  std::vector<std::string> violations() const;
  void validate() const;  ///< throws ConfigError naming the first violation
};

/// Measured norms and bookkeeping of one step.
struct KamEstimates {
  double N = 0.0;                ///< truncation/scan bound used
  double y_norm = 0.0;           ///< |Y|_{r'}
  double b_minus_id = 0.0;       ///< |B - Id|_{r'} (non-resonant case)
  double b_strip = 0.0;          ///< |B|_{r'}
  double b_c0 = 0.0;             ///< ||B||_0
  double f_plus_strip = 0.0;     ///< |f_+|_{r'}
  double a_change = 0.0;         ///< ||A_+ - A|| or ||A''||
  double resonant_t = 0.0;       ///< |t| of the su(1,1) form of A''
  double resonant_v = 0.0;       ///< |v| of the su(1,1) form of A''
  double divisor_min = 1.0;      ///< smallest divisor modulus hit by the solve
  double conj_residual = 0.0;    ///< sampled identity residual
  std::vector<std::string> warnings;
};

enum class StepCase { nonresonant, resonant };

struct KamStepResult {
  StepCase step_case = StepCase::nonresonant;
  Conjugation B;
  ConstantCocycle A_plus;
  FourierMap f_plus;
  std::optional<Mode> resonance_site;
  KamEstimates estimates;
};

/// Resonant site m* with 0 < |m*|_1 <= N minimizing dist(2 rho - <m,alpha>, Z)
/// when that minimum is strictly below min(eps^sigma, cap); ties broken by
/// smaller |m|_1 then lexicographic order. Hyperbolic rho (imaginary part
/// above the threshold) never resonates.
std::optional<Mode> find_resonance(Complex rho, const Frequency& freq, int order, double eps,
                                   double sigma, double cap = 0.01);

/// Solve Y(theta+alpha) A - A Y(theta) = -A g(theta) mode by mode through the
/// triangular su(1,1) frame. g must have zero mean and no resonant modes.
/// Throws SmallDivisorError below the 1e-13 divisor floor.
FourierMap solve_cohomological(const ConstantCocycle& A, const FourierMap& g,
                               const Frequency& freq, double* divisor_min = nullptr);

/// Non-resonant elimination: e^{Y(.+alpha)} (A e^{g}) e^{-Y} = A e^{g_re} with
/// g_re in the eta-resonant subspace. Returns (Y, g_re).
std::pair<FourierMap, FourierMap> eliminate_nonresonant(const ConstantCocycle& A,
                                                        const FourierMap& g, double eta, double r,
                                                        const Frequency& freq,
                                                        KamEstimates* est = nullptr);

KamStepResult nonresonant_step(const ConstantCocycle& A, const FourierMap& f, double r,
                               double r_prime, double eps, const KamSchedule& sched,
                               const Frequency& freq);

KamStepResult resonant_step(const ConstantCocycle& A, const FourierMap& f, const Mode& m_star,
                            double r, double r_prime, double eps, const KamSchedule& sched,
                            const Frequency& freq);

/// Dispatch on find_resonance over the oriented rotation angle of A.
KamStepResult kam_step(const ConstantCocycle& A, const FourierMap& f, double r, double r_prime,
                       double eps, const KamSchedule& sched, const Frequency& freq);

struct RotClassParams {
  double gamma = 1e-3;
  double tau = 2.0;
  int n_max = 1000;
};

enum class Reducibility { diophantine, rational, inconclusive };

struct StageRecord {
  int j = 0;
  double l_j = 0.0;
  double eps_formula = 0.0;   ///< schedule value eps_{l_j}
  double eps_measured = 0.0;  ///< strip norm driving the step
  StepCase step_case = StepCase::nonresonant;
  std::optional<Mode> resonance_site;
  double residual_c0 = 0.0;  ///< perturbation C0 norm after the stage
  KamEstimates estimates;
};

struct ReducibilityReport {
  Reducibility classification = Reducibility::inconclusive;
  Mode m0;  ///< rational label (classification == rational)
  std::vector<StageRecord> steps;
  std::vector<int> resonant_steps;  ///< stage indices of Omega
  Conjugation B_final;
  ConstantCocycle A_final;
  double residual = 0.0;  ///< final perturbation C0 norm
  Eigen::VectorXi degree_final;  ///< sum of resonant-site increments
  double rho_refined = 0.0;   ///< <deg,alpha>/2 + oriented rho of A_final (mod 1)
  double rho_estimated = 0.0; ///< Birkhoff estimate on the input cocycle
  KamSchedule schedule;
  std::vector<std::string> warnings;
};

/// Full iteration: analytic approximants f_{l_j}, one step per
/// stage at radii (1/l_j, 1/l_{j+1}), finite resonant ledger, classification.
ReducibilityReport run_iteration(const ConstantCocycle& A, const FourierMap& f_ck,
                                 const Frequency& freq, const KamSchedule& sched,
                                 const RotClassParams& rot_params);

std::string report_to_json(const ReducibilityReport& rep);

}  // namespace kamred
