// Acceptance suite: one quantitative criterion per line, PASS/FAIL verdicts,
// nonzero exit when anything fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>

#include "kamred/errors.hpp"
#include "kamred/kam.hpp"
#include "kamred/schrodinger.hpp"

using namespace kamred;

namespace {

int g_failures = 0;

void criterion(int number, const std::string& name, const std::function<bool(std::string&)>& fn) {
  std::string detail;
  bool ok = false;
  try {
    ok = fn(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  std::printf("%s criterion %2d: %s%s%s\n", ok ? "PASS" : "FAIL", number, name.c_str(),
              detail.empty() ? "" : " -- ", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::mt19937& rng() {
  static std::mt19937 gen(12345);
  return gen;
}

FourierMap random_sl2r_map(int top, double scale, bool zero_mean) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  FourierMap f(1, Period::torus, Algebra::sl2r);
  for (int n = 1; n <= top; ++n) {
    Mat2c c;
    c << Complex(dist(rng()), dist(rng())), Complex(dist(rng()), dist(rng())),
        Complex(dist(rng()), dist(rng())), 0.0;
    c(1, 1) = -c(0, 0);
    f.set_coeff(Mode(n), c);
    f.set_coeff(Mode(-n), c.conjugate());
  }
  if (!zero_mean) {
    Mat2c c0;
    c0 << dist(rng()), dist(rng()), dist(rng()), 0.0;
    c0(1, 1) = -c0(0, 0);
    f.set_coeff(Mode(), Mat2c(0.5 * (c0 + c0.conjugate())));
  }
  return f.scaled(scale / f.strip_norm(0.0));
}

double generic_angle(const Frequency& freq, int reach) {
  double best_rho = 0.2, best_dist = 0.0;
  for (int i = 1; i < 500; ++i) {
    const double rho = 0.05 + 0.4 * i / 500.0;
    double dmin = dist_to_integers(2.0 * rho);
    for (int m = -reach; m <= reach; ++m) {
      if (m == 0) continue;
      dmin = std::min(dmin, dist_to_integers(2.0 * rho - m * freq.alpha[0]));
    }
    if (dmin > best_dist) {
      best_dist = dmin;
      best_rho = rho;
    }
  }
  return best_rho;
}

FourierMap trig_rotation(int w, double a1, double a3) {
  Mat2c jm;
  jm << 0.0, -1.0, 1.0, 0.0;
  FourierMap gen(1, Period::double_torus, Algebra::sl2r);
  gen.add_coeff(Mode(2), Mat2c(M_PI * a1 * jm));
  gen.add_coeff(Mode(-2), Mat2c(M_PI * a1 * jm));
  gen.add_coeff(Mode(6), Mat2c(M_PI * a3 * jm));
  gen.add_coeff(Mode(-6), Mat2c(M_PI * a3 * jm));
  return half_rotation_map(1, Mode(w)).product(exp_series(gen));
}

// AMO energy calibrated so that 2 rho clears every site |m| <= 30.
constexpr double kDiophantineEnergy = 1.650667;

ReducibilityReport diophantine_run() {
  const Frequency freq = Frequency::golden();
  const Potential amo = Potential::amo(0.01);
  const SchrodingerPerturbation pert = schrodinger_perturbation(amo, kDiophantineEnergy);
  return run_iteration(ConstantCocycle(pert.A), pert.f, freq, KamSchedule{}, RotClassParams{});
}

}  // namespace

int main() {
  const Frequency freq = Frequency::golden();
  const double alpha = freq.alpha[0];

  criterion(1, "cohomological solver: 40-mode residual below 1e-10 |g|_0 in < 1 s",
            [&](std::string& detail) {
              Mat2d shear;
              shear << 1.0, 0.5, 0.0, 1.0;
              const Mat2d a_mat = shear * rotation(generic_angle(freq, 24)) * shear.inverse();
              const ConstantCocycle a(a_mat);
              const FourierMap g = random_sl2r_map(20, 1e-3, true);  // modes +-1..20
              const auto t0 = std::chrono::steady_clock::now();
              const FourierMap y = solve_cohomological(a, g, freq);
              const auto t1 = std::chrono::steady_clock::now();
              double worst = 0.0;
              for (int k = 0; k < 512; ++k) {
                Eigen::VectorXd theta(1);
                theta << static_cast<double>(k) / 512.0;
                const Mat2c lhs = y.evaluate(theta + freq.alpha) * a_mat.cast<Complex>() -
                                  a_mat.cast<Complex>() * y.evaluate(theta) +
                                  a_mat.cast<Complex>() * g.evaluate(theta);
                worst = std::max(worst, spectral_norm(lhs));
              }
              const double seconds = std::chrono::duration<double>(t1 - t0).count();
              std::ostringstream os;
              os << "residual " << worst << " vs " << 1e-10 * g.strip_norm(0.0) << ", "
                 << seconds << " s";
              detail = os.str();
              return worst <= 1e-10 * g.strip_norm(0.0) && seconds < 1.0;
            });

  criterion(2, "rotation number: free closed form to 1e-3 and the conjugacy shift law to 2e-3",
            [&](std::string& detail) {
              const Potential zero = Potential::amo(0.0);
              double worst_free = 0.0;
              for (int i = 0; i < 50; ++i) {
                const double phi = 0.03 + 0.44 * i / 49.0;
                const Cocycle c =
                    schrodinger_cocycle(zero, freq, 2.0 * std::cos(2 * M_PI * phi));
                worst_free = std::max(worst_free,
                                      std::abs(rotation_number(c, 100000) - phi));
              }
              const Potential amo = Potential::amo(0.05);
              const Cocycle base = schrodinger_cocycle(amo, freq, 1.2);
              const double rho0 = rotation_number(base, 100000);
              std::uniform_int_distribution<int> wind(-3, 3);
              std::uniform_real_distribution<double> amp(-0.2, 0.2);
              double worst_shift = 0.0;
              for (int t = 0; t < 20; ++t) {
                const int m = wind(rng());
                Conjugation z;
                z.map = trig_rotation(m, amp(rng()), amp(rng()));
                z.degree = Eigen::VectorXi::Constant(1, m);
                const double rho1 = rotation_number(conjugate(base, z), 100000);
                worst_shift = std::max(
                    worst_shift, dist_to_integers(rho1 - rho0 - 0.5 * m * alpha));
              }
              std::ostringstream os;
              os << "free err " << worst_free << ", shift err " << worst_shift;
              detail = os.str();
              return worst_free <= 1e-3 && worst_shift <= 2e-3;
            });

  criterion(3, "non-resonant step contraction at eps = 1e-8 with identity residual 1e-12",
            [&](std::string& detail) {
              const KamSchedule sched;
              const double eps = 1e-8, r = 0.5, rp = 0.25;
              const Mat2d a_mat = rotation(generic_angle(freq, 24));
              FourierMap f(1, Period::torus, Algebra::sl2r);
              Mat2c c;
              c << 0.3, 0.8, -0.5, -0.3;
              f.set_coeff(Mode(1), c);
              f.set_coeff(Mode(-1), c.conjugate());
              f = f.scaled(eps / f.strip_norm(r));
              const KamStepResult step =
                  nonresonant_step(ConstantCocycle(a_mat), f, r, rp, eps, sched, freq);
              const double bound = 4.0 * std::pow(eps, 2.0 - 8.0 / sched.D);
              std::ostringstream os;
              os << "|f+| " << step.estimates.f_plus_strip << " vs " << bound
                 << ", residual " << step.estimates.conj_residual;
              detail = os.str();
              return step.estimates.f_plus_strip <= bound &&
                     step.estimates.conj_residual <= 1e-12;
            });

  criterion(4, "elimination bounds |Y| <= eps^(1/2), |g_re| <= 2 eps on 20 maps",
            [&](std::string& detail) {
              const Mat2d a_mat = rotation(0.171);
              const ConstantCocycle a(a_mat);
              double worst_y = 0.0, worst_g = 0.0;
              for (double eps : {1e-6, 1e-9}) {
                for (int t = 0; t < 10; ++t) {
                  FourierMap g = random_sl2r_map(6, 1.0, false);
                  g = g.scaled(eps / g.strip_norm(0.5));
                  const double eta = 13.0 * a.norm() * a.norm() * std::sqrt(eps);
                  auto [y, g_re] = eliminate_nonresonant(a, g, eta, 0.5, freq);
                  worst_y = std::max(worst_y, y.strip_norm(0.5) / std::sqrt(eps));
                  worst_g = std::max(worst_g, g_re.strip_norm(0.5) / (2.0 * eps));
                }
              }
              std::ostringstream os;
              os << "max |Y|/eps^(1/2) = " << worst_y << ", max |g_re|/(2 eps) = " << worst_g;
              detail = os.str();
              return worst_y <= 1.0 && worst_g <= 1.0;
            });

  criterion(5, "full reduction, Diophantine case: <= 8 stages to 1e-12 in < 60 s",
            [&](std::string& detail) {
              const auto t0 = std::chrono::steady_clock::now();
              const ReducibilityReport rep = diophantine_run();
              const auto t1 = std::chrono::steady_clock::now();
              const double seconds = std::chrono::duration<double>(t1 - t0).count();
              const Mat2d r = rotation(oriented_rho(rep.A_final.A).real());
              const double rot_dist = (rep.A_final.A - r).norm();
              std::ostringstream os;
              os << "stages " << rep.steps.size() << ", residual " << rep.residual
                 << ", |A_final - R| " << rot_dist << ", " << seconds << " s";
              detail = os.str();
              return rep.classification == Reducibility::diophantine &&
                     rep.steps.size() <= 8 && rep.residual <= 1e-12 && rot_dist <= 1e-8 &&
                     seconds < 60.0;
            });

  criterion(6, "full reduction, rational case: label 1, rho(A_final) <= 1e-8, degree 1",
            [&](std::string& detail) {
              const Potential amo = Potential::amo(0.01);
              ScanOptions opts;
              opts.cert_window = 400;
              const double e0 = 2.0 * std::cos(M_PI * alpha);
              const auto gaps = detect_gaps(amo, freq, e0 - 0.1, e0 + 0.1, 40, 1e-9, opts);
              if (gaps.empty()) {
                detail = "gap not found";
                return false;
              }
              const double e_mid = 0.5 * (gaps[0].lo + gaps[0].hi);
              const SchrodingerPerturbation pert = schrodinger_perturbation(amo, e_mid);
              const ReducibilityReport rep = run_iteration(ConstantCocycle(pert.A), pert.f,
                                                           freq, KamSchedule{}, RotClassParams{});
              const double rho_final = std::abs(oriented_rho(rep.A_final.A).real());
              std::ostringstream os;
              os << "class " << (rep.classification == Reducibility::rational ? "rational" : "?")
                 << "(m0=" << rep.m0[0] << "), rho(A_final) " << rho_final << ", degree "
                 << rep.degree_final[0];
              detail = os.str();
              return rep.classification == Reducibility::rational && rep.m0 == Mode(1) &&
                     rho_final <= 1e-8 && rep.degree_final[0] == 1;
            });

  criterion(7, "finite resonances: none after the stage predicted by the schedule criterion",
            [&](std::string& detail) {
              const KamSchedule sched;
              const RotClassParams rot;
              const ReducibilityReport rep = diophantine_run();
              int j_prime = std::numeric_limits<int>::max();
              int deg = 0;
              for (const auto& s : rep.steps) {
                if (s.step_case == StepCase::resonant) deg += (*s.resonance_site)[0];
                const double lhs =
                    std::pow(s.eps_formula, (1.0 + sched.s) * sched.sigma / 2.0) *
                    std::pow(1.0 + std::abs(deg), sched.tau);
                if (lhs <= rot.gamma) {
                  j_prime = s.j;
                  break;
                }
              }
              bool ok = true;
              for (int idx : rep.resonant_steps) ok = ok && idx <= j_prime;
              std::ostringstream os;
              os << rep.resonant_steps.size() << " resonant steps, predicted stage "
                 << (j_prime == std::numeric_limits<int>::max() ? -1 : j_prime);
              detail = os.str();
              return ok;
            });

  criterion(8, "IDS: counting agreement 2e-3 on 100 energies, monotone, Holder >= 0.45",
            [&](std::string& detail) {
              const Potential amo = Potential::amo(0.05);
              double worst = 0.0, prev = -1.0;
              bool monotone = true;
              for (int i = 0; i < 100; ++i) {
                const double e = -2.2 + 4.4 * i / 99.0;
                const double n_rot = ids(amo, freq, e, 100000);
                const double n_cnt = counting_ids(amo, freq, e, 2000);
                worst = std::max(worst, std::abs(n_rot - n_cnt));
                if (n_rot < prev - 2e-3) monotone = false;
                prev = n_rot;
              }
              double min_slope = std::numeric_limits<double>::infinity();
              for (double e0 : {-1.2, 0.0, 1.3}) {
                double lx = 0, ly = 0, lxx = 0, lxy = 0;
                int n = 0;
                for (int i = 0; i < 10; ++i) {
                  const double eps = 1e-4 * std::pow(1e3, i / 9.0);
                  const double dn = counting_ids(amo, freq, e0 + eps, 400000) -
                                    counting_ids(amo, freq, e0 - eps, 400000);
                  if (dn <= 0) continue;
                  const double x = std::log(eps), y = std::log(dn);
                  lx += x;
                  ly += y;
                  lxx += x * x;
                  lxy += x * y;
                  ++n;
                }
                if (n < 5) return false;
                min_slope = std::min(min_slope, (n * lxy - lx * ly) / (n * lxx - lx * lx));
              }
              std::ostringstream os;
              os << "max |N_rot - N_count| = " << worst << ", min Holder slope = " << min_slope;
              detail = os.str();
              return worst <= 2e-3 && monotone && min_slope >= 0.45;
            });

  // Criteria 9 and 10 share the lambda = 0.05 gap scan.
  const Potential amo05 = Potential::amo(0.05);
  std::vector<Gap> gaps05;
  double hull_lo = 0.0, hull_hi = 0.0;
  {
    ScanOptions opts;
    opts.cert_window = 400;
    opts.jobs = 4;
    gaps05 = detect_gaps(amo05, freq, -2.4, 2.4, 600, 1e-6, opts);
    auto hyper = [&](double e) {
      return cone_certificate(schrodinger_cocycle(amo05, freq, e), 1024, 400).hyperbolic;
    };
    double a = -2.4, b = 0.0;
    for (int i = 0; i < 40; ++i) {
      const double mid = 0.5 * (a + b);
      (hyper(mid) ? a : b) = mid;
    }
    hull_lo = 0.5 * (a + b);
    a = 0.0;
    b = 2.4;
    for (int i = 0; i < 40; ++i) {
      const double mid = 0.5 * (a + b);
      (hyper(mid) ? b : a) = mid;
    }
    hull_hi = 0.5 * (a + b);
  }

  criterion(9, "gap labeling: every detected AMO gap with |m| <= 5 matches 2 rho to 1e-4",
            [&](std::string& detail) {
              bool has_plus = false, has_minus = false, all_match = true;
              double worst = 0.0;
              for (const auto& g : gaps05) {
                if (!g.label) {
                  all_match = false;
                  continue;
                }
                const int m = (*g.label)[0];
                if (std::abs(m) > 5) continue;
                const double d = dist_to_integers(2.0 * g.rho - freq.pairing(*g.label));
                worst = std::max(worst, d);
                all_match = all_match && d <= 1e-4;
                if (m == 1) has_plus = true;
                if (m == -1) has_minus = true;
              }
              std::ostringstream os;
              os << gaps05.size() << " gaps, worst label distance " << worst;
              detail = os.str();
              return all_match && has_plus && has_minus;
            });

  criterion(10, "homogeneity: interval 1 +- 1e-3, depth-10 Cantor <= 0.1, AMO >= 0.3",
            [&](std::string& detail) {
              const double nu_int =
                  homogeneity(SpectrumIndicator::interval(0.0, 1.0, 5e-6), 1e-2);
              const double nu_cantor = homogeneity(
                  SpectrumIndicator::cantor_middle_thirds(0.0, 1.0, 10, 1e-6), 1e-5);
              const double nu_amo =
                  homogeneity(SpectrumIndicator::from_gaps(hull_lo, hull_hi, gaps05, 1e-5),
                              1e-4);
              std::ostringstream os;
              os << "interval " << nu_int << ", cantor " << nu_cantor << ", AMO " << nu_amo;
              detail = os.str();
              return std::abs(nu_int - 1.0) <= 1e-3 && nu_cantor <= 0.1 && nu_amo >= 0.3;
            });

  criterion(11, "transport: free ballistic constant 2 +- 2%, AMO speed steady and > 0.1",
            [&](std::string& detail) {
              InitialState delta;
              const Potential zero = Potential::amo(0.0);
              const TransportResult free_run =
                  transport_velocity(zero, freq, 0.0, 2000, {100.0, 200.0, 400.0}, delta);
              bool ok = true;
              double norm_err = 0.0;
              for (const auto& p : free_run.points) {
                ok = ok && std::abs(p.second_moment - 2.0) <= 0.04;
                ok = ok && std::abs(p.velocity) <= 2.0 + 1e-9;
                norm_err = std::max(norm_err, std::abs(p.norm - 1.0));
              }
              const TransportResult amo_run =
                  transport_velocity(amo05, freq, 0.0, 2000, {200.0, 400.0}, delta);
              const double s200 = amo_run.points[0].speed, s400 = amo_run.points[1].speed;
              const double drift = std::abs(s400 - s200) / std::max(s400, 1e-12);
              for (const auto& p : amo_run.points) {
                ok = ok && std::abs(p.velocity) <= 2.0 + 2.0 * amo05.sup_bound() + 1e-9;
                norm_err = std::max(norm_err, std::abs(p.norm - 1.0));
              }
              std::ostringstream os;
              os << "free <X^2>/T^2 at T=400: " << free_run.points[2].second_moment
                 << ", AMO speed " << s400 << ", drift " << drift << ", norm err " << norm_err;
              detail = os.str();
              return ok && drift < 0.05 && s400 > 0.1 && norm_err <= 1e-12;
            });

  criterion(12, "Zehnder chain: all three approximation bounds hold with the fitted C'",
            [&](std::string& detail) {
              const ApproxParams params{3, 8.0};
              double fitted = 0.0;
              std::uniform_real_distribution<double> dist(-1.0, 1.0);
              for (int trial = 0; trial < 20; ++trial) {
                const int k = 2 + trial % 4;
                FourierMap f(1, Period::torus, Algebra::sl2r);
                for (int n = 1; n <= 64; ++n) {
                  Mat2c c;
                  c << Complex(dist(rng()), dist(rng())), Complex(dist(rng()), dist(rng())),
                      Complex(dist(rng()), dist(rng())), 0.0;
                  c(1, 1) = -c(0, 0);
                  c *= std::pow(static_cast<double>(n), -(k + 1.0)) /
                       std::max(1.0, spectral_norm(c));
                  f.set_coeff(Mode(n), c);
                  f.set_coeff(Mode(-n), c.conjugate());
                }
                const double fk = f.ck_norm(k, 512);
                double prev_err = std::numeric_limits<double>::infinity();
                FourierMap prev = smooth_approximate(f, 1, params);
                for (int j = 1; j <= 12; ++j) {
                  const FourierMap fj = smooth_approximate(f, j, params);
                  const double err = (fj - f).ck_norm(0, 512);
                  if (err > prev_err + 1e-12) return false;  // first bound
                  prev_err = err;
                  fitted = std::max(fitted, fj.strip_norm(1.0 / j) / fk);  // second bound
                  if (j > 1) {
                    const double inc = (fj - prev).strip_norm(1.0 / j);  // third bound
                    fitted = std::max(fitted, inc / (std::pow(1.0 / (j - 1.0), k) * fk));
                  }
                  prev = fj;
                }
              }
              std::ostringstream os;
              os << "fitted C' = " << fitted << " (configured " << params.c_prime << ")";
              detail = os.str();
              return fitted <= params.c_prime;
            });

  std::printf("%d of 12 criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
