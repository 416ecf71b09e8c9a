#include "kamred/schrodinger.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include "kamred/errors.hpp"

namespace kamred {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

Potential Potential::amo(double lambda) {
  Potential p;
  p.series = ScalarSeries::cosine(1);
  p.coupling = lambda;
  return p;
}

Cocycle schrodinger_cocycle(const Potential& v, const Frequency& freq, double energy) {
  FourierMap map(freq.dim(), Period::torus, Algebra::gl2c);
  Mat2c head;
  head << energy, -1.0, 1.0, 0.0;
  map.set_coeff(Mode(), head);
  for (const auto& [n, c] : v.series.coeffs) {
    Mat2c m = Mat2c::Zero();
    m(0, 0) = -v.coupling * c;
    map.add_coeff(n, m);
  }
  map.drop_small(0.0);
  return Cocycle::make_direct(freq, std::move(map));
}

SchrodingerPerturbation schrodinger_perturbation(const Potential& v, double energy) {
  SchrodingerPerturbation out;
  out.A << energy, -1.0, 1.0, 0.0;
  out.f = FourierMap(v.series.dim, Period::torus, Algebra::sl2r);
  for (const auto& [n, c] : v.series.coeffs) {
    Mat2c m = Mat2c::Zero();
    m(1, 0) = v.coupling * c;
    out.f.add_coeff(n, m);
  }
  out.f.drop_small(0.0);
  return out;
}

double ids(const Potential& v, const Frequency& freq, double energy, long n_iter) {
  const double rho = rotation_number(schrodinger_cocycle(v, freq, energy), n_iter);
  const double folded = std::min(rho, 1.0 - rho);  // Schrodinger rho lives in [0, 1/2]
  return std::min(1.0, std::max(0.0, 1.0 - 2.0 * folded));
}

double counting_ids(const Potential& v, const Frequency& freq, double energy, int size,
                    double theta0) {
  if (size < 2) throw Error("counting_ids: size too small");
  // Sturm/LDL^T inertia count for the Dirichlet tridiagonal truncation.
  long count = 0;
  double d = 0.0;
  Eigen::VectorXd theta = Eigen::VectorXd::Constant(freq.dim(), theta0);
  for (int i = 0; i < size; ++i) {
    const double diag = v.value(theta) - energy;
    d = (i == 0) ? diag : diag - 1.0 / d;
    if (d == 0.0) d = -1e-300;
    if (d < 0.0) ++count;
    theta += freq.alpha;
  }
  return static_cast<double>(count) / size;
}

namespace {

/// Shared-nothing worker pool over an index range; the first exception wins
/// and is rethrown on the caller thread.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  jobs = std::max(1, jobs);
  if (jobs == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

std::vector<SpectralSample> scan_spectrum(const Potential& v, const Frequency& freq,
                                          const std::vector<double>& energies,
                                          const ScanOptions& opts) {
  std::vector<SpectralSample> out(energies.size());
  parallel_for(energies.size(), opts.jobs, [&](std::size_t i) {
    SpectralSample& s = out[i];
    s.E = energies[i];
    const Cocycle c = schrodinger_cocycle(v, freq, s.E);
    double rho_raw = rotation_number(c, opts.n_iter);
    s.rho = std::min(rho_raw, 1.0 - rho_raw);
    s.ids = std::min(1.0, std::max(0.0, 1.0 - 2.0 * s.rho));
    s.lyap = lyapunov_exponent(c, opts.lyap_iter);
    const HyperbolicityCertificate cert = cone_certificate(c, opts.cert_grid, opts.cert_window);
    s.hyperbolic = cert.hyperbolic;
    if (cert.margin > 0.0 && !cert.hyperbolic) s.edge_flag = true;
  });

  // Contiguous hyperbolic runs form candidate gaps; label each run through
  // the locked rotation number at its midpoint.
  std::size_t i = 0;
  while (i < out.size()) {
    if (!out[i].hyperbolic) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < out.size() && out[j + 1].hyperbolic) ++j;
    const std::size_t mid = (i + j) / 2;
    const double two_rho = 2.0 * out[mid].rho;
    std::optional<Mode> label;
    double best = std::numeric_limits<double>::infinity();
    for (int m = -opts.label_search; m <= opts.label_search; ++m) {
      Mode mm(m);
      // General d: search axis 1 only for d = 1; the full box for d > 1 would
      // go here (desk scope is d = 1 potentials).
      const double dist = dist_to_integers(two_rho - freq.pairing(mm));
      if (dist < best) {
        best = dist;
        label = mm;
      }
    }
    if (best > opts.label_tol) label.reset();
    for (std::size_t k = i; k <= j; ++k) {
      out[k].gap_label = label;
      // an unresolved label leaves the whole run edge-flagged
      out[k].edge_flag = !label || (k == i || k == j);
    }
    i = j + 1;
  }
  return out;
}

namespace {

bool certified_hyperbolic(const Potential& v, const Frequency& freq, double energy,
                          const ScanOptions& opts) {
  const HyperbolicityCertificate cert =
      cone_certificate(schrodinger_cocycle(v, freq, energy), opts.cert_grid, opts.cert_window);
  return cert.hyperbolic;
}

}  // namespace

std::vector<Gap> detect_gaps(const Potential& v, const Frequency& freq, double e_min, double e_max,
                             int coarse_grid, double edge_tol, const ScanOptions& opts) {
  std::vector<char> hyp(coarse_grid + 1);
  std::vector<double> grid(coarse_grid + 1);
  for (int i = 0; i <= coarse_grid; ++i) {
    grid[i] = e_min + (e_max - e_min) * i / coarse_grid;
    hyp[i] = certified_hyperbolic(v, freq, grid[i], opts) ? 1 : 0;
  }
  auto bisect = [&](double inside_gap, double inside_spec) {
    // invariant: hyperbolic at inside_gap, not at inside_spec
    for (int it = 0; it < 60 && std::abs(inside_gap - inside_spec) > edge_tol; ++it) {
      const double mid = 0.5 * (inside_gap + inside_spec);
      (certified_hyperbolic(v, freq, mid, opts) ? inside_gap : inside_spec) = mid;
    }
    return 0.5 * (inside_gap + inside_spec);
  };

  std::vector<Gap> gaps;
  int i = 0;
  while (i <= coarse_grid) {
    if (!hyp[i]) {
      ++i;
      continue;
    }
    int j = i;
    while (j + 1 <= coarse_grid && hyp[j + 1]) ++j;
    const bool interior = (i > 0 && j < coarse_grid);
    if (interior) {
      Gap g;
      g.lo = bisect(grid[i], grid[i - 1]);
      g.hi = bisect(grid[j], grid[j + 1]);
      const double mid = 0.5 * (g.lo + g.hi);
      const double rho_raw = rotation_number(schrodinger_cocycle(v, freq, mid), opts.n_iter);
      g.rho = std::min(rho_raw, 1.0 - rho_raw);
      double best = std::numeric_limits<double>::infinity();
      for (int m = -opts.label_search; m <= opts.label_search; ++m) {
        const double dist = dist_to_integers(2.0 * g.rho - freq.pairing(Mode(m)));
        if (dist < best) {
          best = dist;
          g.label = Mode(m);
        }
      }
      if (best > opts.label_tol) g.label.reset();
      gaps.push_back(g);
    }
    i = j + 1;
  }
  return gaps;
}

SpectrumIndicator SpectrumIndicator::interval(double lo, double hi, double de) {
  SpectrumIndicator ind;
  ind.e0 = lo;
  ind.de = de;
  const int n = static_cast<int>(std::round((hi - lo) / de)) + 1;
  ind.in.assign(n, true);
  return ind;
}

SpectrumIndicator SpectrumIndicator::cantor_middle_thirds(double lo, double hi, int depth,
                                                          double de) {
  SpectrumIndicator ind;
  ind.e0 = lo;
  ind.de = de;
  const int n = static_cast<int>(std::round((hi - lo) / de)) + 1;
  ind.in.assign(n, false);
  struct Piece {
    double a, b;
    int level;
  };
  std::vector<Piece> stack{{lo, hi, 0}};
  while (!stack.empty()) {
    const Piece p = stack.back();
    stack.pop_back();
    if (p.level == depth) {
      const int ia = static_cast<int>(std::ceil((p.a - lo) / de - 1e-12));
      const int ib = static_cast<int>(std::floor((p.b - lo) / de + 1e-12));
      for (int i = std::max(0, ia); i <= std::min(n - 1, ib); ++i) ind.in[i] = true;
      continue;
    }
    const double third = (p.b - p.a) / 3.0;
    stack.push_back({p.a, p.a + third, p.level + 1});
    stack.push_back({p.b - third, p.b, p.level + 1});
  }
  return ind;
}

SpectrumIndicator SpectrumIndicator::from_gaps(double lo, double hi, const std::vector<Gap>& gaps,
                                               double de) {
  SpectrumIndicator ind;
  ind.e0 = lo;
  ind.de = de;
  const int n = static_cast<int>(std::round((hi - lo) / de)) + 1;
  ind.in.assign(n, true);
  for (const Gap& g : gaps) {
    const int ia = std::max(0, static_cast<int>(std::ceil((g.lo - lo) / de)));
    const int ib = std::min(n - 1, static_cast<int>(std::floor((g.hi - lo) / de)));
    for (int i = ia; i <= ib; ++i) ind.in[i] = false;
  }
  return ind;
}

double homogeneity(const SpectrumIndicator& ind, double resolution) {
  if (ind.de > resolution / 10.0 + 1e-18) {
    throw ConfigError("homogeneity: grid spacing must be <= resolution/10");
  }
  const int n = static_cast<int>(ind.in.size());
  std::vector<long> prefix(n + 1, 0);
  long marked = 0;
  int first = -1, last = -1;
  for (int i = 0; i < n; ++i) {
    if (ind.in[i]) {
      ++marked;
      if (first < 0) first = i;
      last = i;
    }
    prefix[i + 1] = marked;
  }
  if (marked == 0) throw EmptySpectrumError("homogeneity: empty spectrum indicator");
  const double diam = std::max(ind.de, (last - first) * ind.de);

  auto measure_window = [&](int center, double eps) {
    // |B cap (E-eps, E+eps)| by cell counting.
    const int a = std::max(0, center - static_cast<int>(std::floor(eps / ind.de)));
    const int b = std::min(n - 1, center + static_cast<int>(std::floor(eps / ind.de)));
    return (prefix[b + 1] - prefix[a]) * ind.de;
  };

  double nu = std::numeric_limits<double>::infinity();
  const int sweep = 50;
  for (int s = 0; s < sweep; ++s) {
    const double eps =
        resolution * std::pow(std::max(1.0, diam / resolution), static_cast<double>(s) / (sweep - 1));
    for (int i = first; i <= last; ++i) {
      if (!ind.in[i]) continue;
      nu = std::min(nu, measure_window(i, eps) / eps);
    }
  }
  return nu;
}

std::string InitialState::describe() const {
  if (kind == Kind::delta) return "delta0";
  return "packet(momentum=" + std::to_string(momentum) + ",width=" + std::to_string(width) + ")";
}

TransportResult transport_velocity(const Potential& v, const Frequency& freq, double theta,
                                   int lattice_half_width, const std::vector<double>& times,
                                   const InitialState& state, const TransportOptions& opts) {
  const int L = lattice_half_width;
  if (L < 500) throw ConfigError("transport_velocity: L must be >= 500");
  double t_max = 0.0;
  for (double t : times) t_max = std::max(t_max, t);
  if (t_max > L / 4.0) throw ConfigError("transport_velocity: max T must be <= L/4");

  const int n = 2 * L + 1;
  Eigen::VectorXd diag(n), sub(n - 1);
  Eigen::VectorXd th = Eigen::VectorXd::Constant(freq.dim(), theta);
  th += static_cast<double>(-L) * freq.alpha;
  for (int i = 0; i < n; ++i) {
    diag[i] = v.value(th);
    th += freq.alpha;
  }
  sub.setOnes();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw Error("transport_velocity: eigen solve failed");
  const Eigen::MatrixXd& u = solver.eigenvectors();
  const Eigen::VectorXd& ev = solver.eigenvalues();

  Eigen::VectorXcd psi0 = Eigen::VectorXcd::Zero(n);
  if (state.kind == InitialState::Kind::delta) {
    psi0[L] = 1.0;
  } else {
    for (int i = 0; i < n; ++i) {
      const double x = i - L;
      psi0[i] = std::polar(std::exp(-x * x / (4.0 * state.width * state.width)),
                           -kTwoPi * state.momentum * x);
    }
    psi0.normalize();
  }
  const Eigen::VectorXcd coef = u.transpose() * psi0;

  // S = i K with K the antisymmetric shift difference.
  Eigen::MatrixXd k_tilde;
  {
    Eigen::MatrixXd ku = Eigen::MatrixXd::Zero(n, n);
    ku.topRows(n - 1) += u.bottomRows(n - 1);   // (K u)_m = u_{m+1} - u_{m-1}
    ku.bottomRows(n - 1) -= u.topRows(n - 1);
    k_tilde.noalias() = u.transpose() * ku;
  }

  TransportResult out;
  out.lattice_half_width = L;
  out.initial_state = state.describe();

  Eigen::VectorXd site_x(n), site_x2(n);
  for (int i = 0; i < n; ++i) {
    site_x[i] = i - L;
    site_x2[i] = site_x[i] * site_x[i];
  }
  const double x0 = psi0.cwiseAbs2().dot(site_x);

  for (double t : times) {
    TransportPoint pt;
    pt.T = t;
    Eigen::VectorXcd phase(n);
    for (int j = 0; j < n; ++j) phase[j] = std::polar(1.0, -ev[j] * t);
    const Eigen::VectorXcd psi_t = u * coef.cwiseProduct(phase).matrix();
    const Eigen::VectorXd density = psi_t.cwiseAbs2();
    pt.norm = std::sqrt(density.sum());

    double boundary = 0.0;
    for (int i = 0; i < 10; ++i) boundary += density[i] + density[n - 1 - i];
    if (boundary > 1e-6) {
      throw BoundaryContaminationError(
          "transport_velocity: boundary mass " + std::to_string(boundary) + " at T = " +
          std::to_string(t));
    }

    const double x_mean = density.dot(site_x);
    const double x2_mean = density.dot(site_x2);
    pt.velocity = t > 0 ? (x_mean - x0) / t : 0.0;
    pt.second_moment = t > 0 ? x2_mean / (t * t) : 0.0;
    pt.speed = t > 0 ? std::sqrt(std::max(0.0, x2_mean)) / t : 0.0;

    // Exact time average of <S>: sum over eigenpairs with the closed-form
    // window integral of e^{i (E_j - E_k) t}.
    if (t > 0) {
      Complex acc(0.0, 0.0);
      for (int j = 0; j < n; ++j) {
        const Complex cj = std::conj(coef[j]);
        for (int k = 0; k < n; ++k) {
          const double ktjk = k_tilde(j, k);
          if (ktjk == 0.0) continue;
          const double w = (ev[j] - ev[k]) * t;
          Complex window;  // (1/T) int_0^T e^{i w s/T * T}... = (e^{iw}-1)/(iw)
          if (std::abs(w) < 1e-8) {
            window = Complex(1.0, 0.5 * w);
          } else {
            window = (std::polar(1.0, w) - 1.0) / Complex(0.0, w);
          }
          acc += cj * coef[k] * Complex(0.0, ktjk) * window;
        }
      }
      pt.timeavg_velocity = acc.real();
    }

    if (opts.quadrature_step) {
      const double h = *opts.quadrature_step;
      const long steps = std::max(2L, static_cast<long>(std::llround(t / h)));
      double sum = 0.0;
      for (long q = 0; q <= steps; ++q) {
        const double tq = t * q / steps;
        Eigen::VectorXcd ph(n);
        for (int j = 0; j < n; ++j) ph[j] = std::polar(1.0, -ev[j] * tq);
        const Eigen::VectorXcd psi_q = u * coef.cwiseProduct(ph).matrix();
        Complex sval(0.0, 0.0);
        for (int i = 0; i < n; ++i) {
          Complex up = (i + 1 < n) ? psi_q[i + 1] : Complex(0.0, 0.0);
          Complex dn = (i - 1 >= 0) ? psi_q[i - 1] : Complex(0.0, 0.0);
          sval += std::conj(psi_q[i]) * Complex(0.0, 1.0) * (up - dn);
        }
        sum += (q == 0 || q == steps) ? 0.5 * sval.real() : sval.real();
      }
      pt.quadrature_check = sum / steps;
    }
    out.points.push_back(pt);
  }

  if (opts.compute_q_block && !times.empty()) {
    const double t = *std::max_element(times.begin(), times.end());
    const int half = 32;
    const int lo = L - half;  // 64 sites centered at 0
    Eigen::MatrixXcd block(2 * half, 2 * half);
    const Eigen::MatrixXd u_rows = u.middleRows(lo, 2 * half);
    // Q_T = U (i K_tilde o window) U^T restricted to the test subspace.
    Eigen::MatrixXcd inner = Eigen::MatrixXcd::Zero(ev.size(), 2 * half);
    // inner = (i K_tilde o window) * u_rows^T
    for (int j = 0; j < ev.size(); ++j) {
      for (int k = 0; k < ev.size(); ++k) {
        const double ktjk = k_tilde(j, k);
        if (ktjk == 0.0) continue;
        const double w = (ev[j] - ev[k]) * t;
        Complex window = (std::abs(w) < 1e-8) ? Complex(1.0, 0.5 * w)
                                              : (std::polar(1.0, w) - 1.0) / Complex(0.0, w);
        const Complex val = Complex(0.0, ktjk) * window;
        for (int b = 0; b < 2 * half; ++b) inner(j, b) += val * u_rows(b, k);
      }
    }
    block.noalias() = u_rows.cast<Complex>() * inner;
    out.q_block = block;
  }
  return out;
}

}  // namespace kamred
