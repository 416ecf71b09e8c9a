#include "doctest.h"

#include <random>

#include "kamred/errors.hpp"
#include "kamred/kam.hpp"
#include "kamred/schrodinger.hpp"

using namespace kamred;

namespace {

// AMO energy whose 2 rho clears every site |m| <= 30 by more than the
// resonance cap (calibrated against the golden mean).
constexpr double kDiophantineEnergy = 1.650667;

double sampled_full_residual(const ReducibilityReport& rep, const Mat2d& a0,
                             const FourierMap& f, const Frequency& freq) {
  double worst = 0.0;
  for (int k = 0; k < 128; ++k) {
    Eigen::VectorXd theta(1);
    theta << 2.0 * k / 128.0;
    const Mat2c b1 = rep.B_final.map.evaluate(theta + freq.alpha);
    const Mat2c b0 = rep.B_final.map.evaluate(theta);
    const Mat2c lhs =
        b1 * a0.cast<Complex>() * expm_traceless(Mat2c(f.evaluate(theta))) * b0.inverse();
    const Mat2c rhs = rep.A_final.A.cast<Complex>();
    worst = std::max(worst, spectral_norm(Mat2c(lhs - rhs)));
  }
  return worst;
}

}  // namespace

TEST_CASE("run_iteration: f = 0 gives a trivial report") {
  const Frequency freq = Frequency::golden();
  const KamSchedule sched;
  const RotClassParams rot;
  const Mat2d a = rotation(0.2371);
  const FourierMap zero = FourierMap::zero(1, Period::torus, Algebra::sl2r);
  const ReducibilityReport rep = run_iteration(ConstantCocycle(a), zero, freq, sched, rot);
  CHECK(rep.steps.empty());
  CHECK(rep.residual == 0.0);
  CHECK(rep.resonant_steps.empty());
  CHECK(rep.degree_final[0] == 0);
  // classification matches rho(A) = 0.2371 (generic: diophantine)
  CHECK(rep.classification == Reducibility::diophantine);
  CHECK(rep.rho_refined == doctest::Approx(0.2371).epsilon(1e-12));
}

TEST_CASE("run_iteration: AMO diophantine energy reduces to a rotation") {
  const Frequency freq = Frequency::golden();
  const KamSchedule sched;
  const RotClassParams rot;
  const Potential amo = Potential::amo(0.01);
  const SchrodingerPerturbation pert = schrodinger_perturbation(amo, kDiophantineEnergy);

  const ReducibilityReport rep =
      run_iteration(ConstantCocycle(pert.A), pert.f, freq, sched, rot);
  CHECK(rep.classification == Reducibility::diophantine);
  CHECK(rep.steps.size() <= 8);
  CHECK(rep.residual <= 1e-12);
  CHECK(rep.resonant_steps.empty());
  CHECK(rep.degree_final[0] == 0);

  // A_final is a rotation R_phi with phi not an integer
  const Mat2d r = rotation(oriented_rho(rep.A_final.A).real());
  CHECK((rep.A_final.A - r).norm() <= 1e-8);
  CHECK(dist_to_integers(oriented_rho(rep.A_final.A).real()) > 1e-3);

  // the final conjugation transports the cocycle onto the constant
  CHECK(sampled_full_residual(rep, pert.A, pert.f, freq) < 1e-10);

  // per-step invariants: identity residual, contraction with slack 4,
  // monotone residual decay (the resonant ledger is empty)
  double prev = 1.0;
  for (const auto& s : rep.steps) {
    CHECK(s.estimates.conj_residual <= 1e-9 * (1.0 + 3.0));
    if (s.step_case == StepCase::nonresonant) {
      CHECK(s.estimates.f_plus_strip <=
            4.0 * std::pow(s.eps_measured, 2.0 - 8.0 / sched.D));
    }
    CHECK(s.residual_c0 <= prev);
    prev = s.residual_c0;
  }

  // rotation bookkeeping: the scheme-exact value agrees with the Birkhoff
  // estimate within the estimator tolerance
  CHECK(dist_to_integers(rep.rho_refined - rep.rho_estimated) < 2e-3);
}

TEST_CASE("run_iteration: AMO gap energy is rational with label 1") {
  const Frequency freq = Frequency::golden();
  const double alpha = freq.alpha[0];
  const KamSchedule sched;
  const RotClassParams rot;
  const Potential amo = Potential::amo(0.01);

  // locate the 2 rho = alpha gap by bisection on the hyperbolicity
  // certificate around E = 2 cos(pi alpha)
  const double e0 = 2.0 * std::cos(M_PI * alpha);
  ScanOptions opts;
  opts.cert_window = 400;
  const std::vector<Gap> gaps = detect_gaps(amo, freq, e0 - 0.1, e0 + 0.1, 40, 1e-9, opts);
  REQUIRE_FALSE(gaps.empty());
  REQUIRE(gaps[0].label.has_value());
  CHECK((*gaps[0].label)[0] == 1);
  CHECK(dist_to_integers(2.0 * gaps[0].rho - alpha) < 1e-4);

  const double e_mid = 0.5 * (gaps[0].lo + gaps[0].hi);
  const SchrodingerPerturbation pert = schrodinger_perturbation(amo, e_mid);
  const ReducibilityReport rep =
      run_iteration(ConstantCocycle(pert.A), pert.f, freq, sched, rot);

  CHECK(rep.classification == Reducibility::rational);
  CHECK(rep.m0 == Mode(1));
  CHECK(rep.degree_final[0] == 1);
  CHECK(rep.residual <= 1e-12);
  REQUIRE_FALSE(rep.resonant_steps.empty());
  CHECK(rep.steps[rep.resonant_steps.front() - 1].resonance_site == Mode(1));
  // rho of the final constant vanishes (hyperbolic-parabolic inside the gap)
  CHECK(std::abs(oriented_rho(rep.A_final.A).real()) <= 1e-8);
  // degree ledger vs the geometric winding of B
  CHECK(rep.B_final.degree[0] == -1);
  CHECK(sampled_full_residual(rep, pert.A, pert.f, freq) < 1e-9);
}

TEST_CASE("run_iteration: odd-parity gap energy classifies with a negative label") {
  // the gap at filling 1 - alpha carries 2 rho = -alpha (mod 1): site -1 with
  // an odd integer part, driving the constant near -Id on removal
  const Frequency freq = Frequency::golden();
  const double alpha = freq.alpha[0];
  const KamSchedule sched;
  const RotClassParams rot;
  const Potential amo = Potential::amo(0.01);
  const double e0 = -2.0 * std::cos(M_PI * alpha);  // mirror of the +1 gap
  ScanOptions opts;
  opts.cert_window = 400;
  const std::vector<Gap> gaps = detect_gaps(amo, freq, e0 - 0.1, e0 + 0.1, 40, 1e-9, opts);
  REQUIRE_FALSE(gaps.empty());
  REQUIRE(gaps[0].label.has_value());
  CHECK((*gaps[0].label)[0] == -1);

  const double e_mid = 0.5 * (gaps[0].lo + gaps[0].hi);
  const SchrodingerPerturbation pert = schrodinger_perturbation(amo, e_mid);
  const ReducibilityReport rep =
      run_iteration(ConstantCocycle(pert.A), pert.f, freq, sched, rot);
  CHECK(rep.classification == Reducibility::rational);
  CHECK(rep.m0 == Mode(-1));
  CHECK(rep.degree_final[0] == -1);
  CHECK(rep.residual <= 1e-10);
  // the final constant sits at rotation number 1/2 (trace near -2)
  CHECK(std::abs(oriented_rho(rep.A_final.A).real() - 0.5) <= 1e-8);
  bool parity_noted = false;
  for (const auto& st : rep.steps) {
    for (const auto& w : st.estimates.warnings) {
      if (w.find("odd-parity") != std::string::npos) parity_noted = true;
    }
  }
  CHECK(parity_noted);
}

TEST_CASE("run_iteration: multi-mode C^k input absorbs ladder increments") {
  const Frequency freq = Frequency::golden();
  KamSchedule sched;
  const RotClassParams rot;

  // potential with modes up to 8 (reachable by the ladder cutoffs 5 then 8)
  Potential pot;
  pot.series.dim = 1;
  for (int n = 1; n <= 8; ++n) {
    const double a = 0.5 * std::pow(static_cast<double>(n), -4.0);
    pot.series.coeffs[Mode(n)] = a;
    pot.series.coeffs[Mode(-n)] = a;
  }
  pot.coupling = 0.02;
  const SchrodingerPerturbation pert = schrodinger_perturbation(pot, kDiophantineEnergy);
  const ReducibilityReport rep =
      run_iteration(ConstantCocycle(pert.A), pert.f, freq, sched, rot);
  CHECK(rep.residual <= 1e-11);
  CHECK(rep.warnings.empty());
  CHECK(sampled_full_residual(rep, pert.A, pert.f, freq) < 1e-9);

  // a fat tail beyond the ladder's reach is reported, not silently dropped
  Potential fat = pot;
  for (int n = 9; n <= 40; ++n) {
    const double a = 0.5 * std::pow(static_cast<double>(n), -4.0);
    fat.series.coeffs[Mode(n)] = a;
    fat.series.coeffs[Mode(-n)] = a;
  }
  const SchrodingerPerturbation pert2 = schrodinger_perturbation(fat, kDiophantineEnergy);
  const ReducibilityReport rep2 =
      run_iteration(ConstantCocycle(pert2.A), pert2.f, freq, sched, rot);
  bool tail_warned = false;
  for (const auto& w : rep2.warnings) {
    if (w.find("ladder") != std::string::npos) tail_warned = true;
  }
  CHECK(tail_warned);
}

TEST_CASE("run_iteration: two-frequency perturbation reduces to a rotation") {
  Eigen::VectorXd a(2);
  a << 0.5 * (std::sqrt(5.0) - 1.0), std::sqrt(2.0) - 1.0;
  const Frequency freq(a, 0.05, 2.5);
  const KamSchedule sched;
  const RotClassParams rot;

  FourierMap f(2, Period::torus, Algebra::sl2r);
  std::mt19937 gen(31);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (const Mode n : {Mode(1, 0), Mode(0, 1), Mode(1, -1)}) {
    Mat2c c;
    c << Complex(dist(gen), dist(gen)), Complex(dist(gen), dist(gen)),
        Complex(dist(gen), dist(gen)), 0.0;
    c(1, 1) = -c(0, 0);
    f.set_coeff(n, c);
    f.set_coeff(-n, c.conjugate());
  }
  f = f.scaled(5e-3 / f.strip_norm(0.5));
  const Mat2d a0 = rotation(0.2049);  // clears every site |m|_1 <= 24 for this alpha

  const ReducibilityReport rep = run_iteration(ConstantCocycle(a0), f, freq, sched, rot);
  CHECK(rep.residual <= 1e-12);
  CHECK(rep.classification == Reducibility::diophantine);
  CHECK(sampled_full_residual(rep, a0, f, freq) < 1e-10);
}

TEST_CASE("run_iteration: entry smallness gate aborts large couplings") {
  const Frequency freq = Frequency::golden();
  const KamSchedule sched;
  const RotClassParams rot;
  const Potential big = Potential::amo(0.5);
  const SchrodingerPerturbation pert = schrodinger_perturbation(big, 1.0);
  CHECK_THROWS_AS(run_iteration(ConstantCocycle(pert.A), pert.f, freq, sched, rot),
                  SmallnessError);
}

TEST_CASE("run_iteration: rotation bookkeeping across a resonant step") {
  const Frequency freq = Frequency::golden();
  const double alpha = freq.alpha[0];
  const KamSchedule sched;
  const RotClassParams rot;

  // constant rotation exactly at the site-2 resonance (even parity) with a
  // small mode-2 perturbation: one resonant step, degree ledger 2
  const Mat2d a = rotation(mod1(alpha));
  std::mt19937 gen(5);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  FourierMap f(1, Period::torus, Algebra::sl2r);
  Mat2c c;
  c << Complex(dist(gen), dist(gen)), Complex(dist(gen), dist(gen)),
      Complex(dist(gen), dist(gen)), 0.0;
  c(1, 1) = -c(0, 0);
  f.set_coeff(Mode(2), c);
  f.set_coeff(Mode(-2), c.conjugate());
  f = f.scaled(1e-5 / f.strip_norm(0.5));

  const ReducibilityReport rep = run_iteration(ConstantCocycle(a), f, freq, sched, rot);
  REQUIRE_FALSE(rep.resonant_steps.empty());
  CHECK(rep.degree_final[0] == 2);
  // scheme-exact rotation equals the input rotation number
  CHECK(dist_to_integers(rep.rho_refined - mod1(alpha)) < 1e-6);
  CHECK(rep.classification == Reducibility::rational);
  CHECK(rep.m0 == Mode(2));
}

TEST_CASE("finite-resonance prediction holds on recorded schedules") {
  const Frequency freq = Frequency::golden();
  const KamSchedule sched;
  const RotClassParams rot;
  const Potential amo = Potential::amo(0.01);
  const SchrodingerPerturbation pert = schrodinger_perturbation(amo, kDiophantineEnergy);
  const ReducibilityReport rep =
      run_iteration(ConstantCocycle(pert.A), pert.f, freq, sched, rot);

  // j' = first recorded stage with eps_{l_j}^{(1+s) sigma/2} (1+|deg|)^tau
  // <= gamma; no resonant step may occur later.
  int j_prime = std::numeric_limits<int>::max();
  Eigen::VectorXi deg = Eigen::VectorXi::Zero(1);
  for (const auto& s : rep.steps) {
    if (s.step_case == StepCase::resonant) deg[0] += (*s.resonance_site)[0];
    const double lhs = std::pow(s.eps_formula, (1.0 + sched.s) * sched.sigma / 2.0) *
                       std::pow(1.0 + std::abs(deg[0]), sched.tau);
    if (lhs <= rot.gamma) {
      j_prime = s.j;
      break;
    }
  }
  for (int idx : rep.resonant_steps) CHECK(idx <= j_prime);
}

TEST_CASE("report serializes with the versioned schema") {
  const Frequency freq = Frequency::golden();
  const ReducibilityReport rep =
      run_iteration(ConstantCocycle(rotation(0.2371)),
                    FourierMap::zero(1, Period::torus, Algebra::sl2r), freq, KamSchedule{},
                    RotClassParams{});
  const std::string json = report_to_json(rep);
  CHECK(json.find("\"schema\": \"kamred.report.v1\"") != std::string::npos);
  CHECK(json.find("\"classification\": \"diophantine\"") != std::string::npos);
}
