// Command-line front end: batch experiments over energy grids, emitting
// deterministic CSV/JSON for external plotting.

#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "kamred/errors.hpp"
#include "kamred/kam.hpp"
#include "kamred/schrodinger.hpp"
#include "nlohmann/json.hpp"

namespace {

using namespace kamred;

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

/// Flat key=value configuration with CLI overrides (overrides win).
struct RunConfig {
  std::map<std::string, std::string> kv;

  static RunConfig load(const std::string& path,
                        const std::map<std::string, std::string>& overrides) {
    RunConfig cfg;
    if (!path.empty()) {
      std::ifstream in(path);
      if (!in) throw ConfigError("config file not readable: " + path);
      std::string line;
      while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
          const auto b = s.find_first_not_of(" \t\r");
          const auto e = s.find_last_not_of(" \t\r");
          return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!key.empty()) cfg.kv[key] = value;
      }
    }
    for (const auto& [k, v] : overrides) cfg.kv[k] = v;
    return cfg;
  }

  bool has(const std::string& k) const { return kv.count(k) > 0; }
  std::string str(const std::string& k, const std::string& dflt) const {
    auto it = kv.find(k);
    return it == kv.end() ? dflt : it->second;
  }
  double num(const std::string& k, double dflt) const {
    auto it = kv.find(k);
    if (it == kv.end()) return dflt;
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument(k);
      return v;
    } catch (...) {
      throw ConfigError("config key '" + k + "' is not a number: " + it->second);
    }
  }
  long integer(const std::string& k, long dflt) const {
    const double v = num(k, static_cast<double>(dflt));
    if (v != std::floor(v)) throw ConfigError("config key '" + k + "' must be an integer");
    return static_cast<long>(v);
  }

  Frequency frequency() const {
    const std::string a = str("alpha", "golden");
    const double kappa = num("kappa", 0.2);
    const double tau = num("tau", 1.5);
    if (a == "golden") return Frequency::golden(kappa, tau);
    Eigen::VectorXd alpha(1);
    try {
      alpha[0] = std::stod(a);
    } catch (...) {
      throw ConfigError("alpha must be 'golden' or a number");
    }
    return Frequency(alpha, kappa, tau);
  }

  Potential potential() const {
    const std::string kind = str("potential", "amo");
    if (kind == "amo") return Potential::amo(num("lambda", 0.0));
    if (kind == "cosine-sum") {
      Potential p;
      p.series.dim = 1;
      p.coupling = num("lambda", 1.0);
      const std::string spec = str("coeffs", "");
      if (spec.empty()) throw ConfigError("cosine-sum potential requires coeffs=n:a,...");
      std::stringstream ss(spec);
      std::string item;
      while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError("coeffs entries must be n:a");
        const int n = std::stoi(item.substr(0, colon));
        const double a = std::stod(item.substr(colon + 1));
        p.series.coeffs[Mode(n)] += 0.5 * a;  // a cos(2 pi n theta)
        p.series.coeffs[Mode(-n)] += 0.5 * a;
      }
      return p;
    }
    throw ConfigError("unknown potential '" + kind + "' (use amo or cosine-sum)");
  }

  KamSchedule schedule() const {
    KamSchedule s;
    s.sigma = num("sigma", s.sigma);
    s.D = static_cast<int>(integer("D", s.D));
    s.D_tilde = num("D_tilde", s.D_tilde);
    s.c = num("c", s.c);
    s.s = num("s", s.s);
    s.M = static_cast<int>(integer("M", s.M));
    s.tau = num("tau", s.tau);
    s.kappa = num("kappa", s.kappa);
    s.k = static_cast<int>(integer("k", s.k));
    s.k0 = static_cast<int>(integer("k0", s.k0));
    s.j_max = static_cast<int>(integer("j_max", s.j_max));
    s.resonance_cap = num("res_cap", s.resonance_cap);
    s.eps_entry = num("eps_entry", s.eps_entry);
    const auto violations = s.violations();
    if (!violations.empty()) {
      throw ConfigError("schedule inequality violated: " + violations.front());
    }
    return s;
  }

  std::vector<double> energy_grid() const {
    std::vector<double> grid;
    if (has("e_list")) {
      std::stringstream ss(str("e_list", ""));
      std::string item;
      while (std::getline(ss, item, ',')) grid.push_back(std::stod(item));
      return grid;
    }
    const double lo = num("e_min", -2.5), hi = num("e_max", 2.5);
    const long count = integer("e_count", 0);
    if (count < 0) throw ConfigError("e_count must be >= 0");
    for (long i = 0; i < count; ++i) {
      grid.push_back(count == 1 ? lo : lo + (hi - lo) * i / (count - 1));
    }
    return grid;
  }

  /// Resolved-config echo: every output begins with these lines; re-running
  /// from the echoed pairs reproduces the file byte for byte. Execution
  /// parameters (out, jobs) do not affect the data and are not echoed.
  std::string echo(const std::string& subcommand) const {
    std::string out = "# kamred " + subcommand + "\n";
    for (const auto& [k, v] : kv) {
      if (k == "out" || k == "jobs") continue;
      out += "# " + k + "=" + v + "\n";
    }
    return out;
  }
};

void write_output(const RunConfig& cfg, const std::string& text) {
  const std::string path = cfg.str("out", "");
  if (path.empty()) {
    std::fputs(text.c_str(), stdout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write output file: " + path);
  out << text;
}

template <typename Fn>
void parallel_grid(std::size_t n, int jobs, Fn&& fn) {
  jobs = std::max(1, jobs);
  if (jobs == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first) first = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

int cmd_rotnum(const RunConfig& cfg) {
  const Frequency freq = cfg.frequency();
  const Potential pot = cfg.potential();
  const auto grid = cfg.energy_grid();
  const long n_iter = cfg.integer("n_iter", 100000);
  const int jobs = static_cast<int>(cfg.integer("jobs", 1));

  std::vector<double> rho(grid.size());
  std::vector<std::string> errors(grid.size());
  parallel_grid(grid.size(), jobs, [&](std::size_t i) {
    try {
      rho[i] = rotation_number(schrodinger_cocycle(pot, freq, grid[i]), n_iter);
    } catch (const NonConvergenceError& e) {
      errors[i] = e.what();
    }
  });

  std::string out = cfg.echo("rotnum") + "E,rho\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!errors[i].empty()) {
      out += "# estimator non-convergence at E=" + fmt17(grid[i]) + ": " + errors[i] + "\n";
      write_output(cfg, out);
      return 3;
    }
    out += fmt17(grid[i]) + "," + fmt17(rho[i]) + "\n";
  }
  write_output(cfg, out);
  return 0;
}

int cmd_ids_scan(const RunConfig& cfg) {
  const Frequency freq = cfg.frequency();
  const Potential pot = cfg.potential();
  const auto grid = cfg.energy_grid();
  ScanOptions opts;
  opts.n_iter = cfg.integer("n_iter", opts.n_iter);
  opts.lyap_iter = cfg.integer("lyap_iter", opts.lyap_iter);
  opts.cert_grid = static_cast<int>(cfg.integer("cert_grid", opts.cert_grid));
  opts.cert_window = static_cast<int>(cfg.integer("cert_window", opts.cert_window));
  opts.jobs = static_cast<int>(cfg.integer("jobs", 1));

  const auto samples = scan_spectrum(pot, freq, grid, opts);
  std::string out = cfg.echo("ids-scan") + "E,rho,ids,lyap,hyperbolic,gap_m\n";
  for (const auto& s : samples) {
    out += fmt17(s.E) + "," + fmt17(s.rho) + "," + fmt17(s.ids) + "," + fmt17(s.lyap) + "," +
           (s.hyperbolic ? "1" : "0") + "," +
           (s.gap_label ? std::to_string((*s.gap_label)[0]) : "") + "\n";
  }
  write_output(cfg, out);
  return 0;
}

int cmd_kam_reduce(const RunConfig& cfg) {
  const Frequency freq = cfg.frequency();
  const Potential pot = cfg.potential();
  const KamSchedule sched = cfg.schedule();
  RotClassParams rot;
  rot.gamma = cfg.num("gamma", rot.gamma);
  rot.tau = cfg.num("rot_tau", rot.tau);
  rot.n_max = static_cast<int>(cfg.integer("rot_nmax", rot.n_max));
  const auto grid = cfg.energy_grid();
  const int jobs = static_cast<int>(cfg.integer("jobs", 1));

  std::vector<std::string> reports(grid.size());
  std::vector<Reducibility> classes(grid.size(), Reducibility::inconclusive);
  parallel_grid(grid.size(), jobs, [&](std::size_t i) {
    const SchrodingerPerturbation pert = schrodinger_perturbation(pot, grid[i]);
    const ReducibilityReport rep =
        run_iteration(ConstantCocycle(pert.A), pert.f, freq, sched, rot);
    reports[i] = report_to_json(rep);
    classes[i] = rep.classification;
  });

  nlohmann::json out;
  out["reports"] = nlohmann::json::array();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    nlohmann::json entry = nlohmann::json::parse(reports[i]);
    entry["E"] = grid[i];
    out["reports"].push_back(std::move(entry));
  }
  std::string text = cfg.echo("kam-reduce");
  text += out.dump(2);
  text += "\n";
  write_output(cfg, text);
  for (const auto c : classes) {
    if (c == Reducibility::inconclusive) return 6;
  }
  return 0;
}

int cmd_homogeneity(const RunConfig& cfg) {
  const std::string set = cfg.str("set", "spectrum");
  const double resolution = cfg.num("resolution", 1e-4);
  const double de = cfg.num("grid_de", resolution / 10.0);

  SpectrumIndicator ind;
  nlohmann::json detail;
  if (set == "interval") {
    ind = SpectrumIndicator::interval(cfg.num("set_lo", 0.0), cfg.num("set_hi", 1.0), de);
  } else if (set == "cantor") {
    ind = SpectrumIndicator::cantor_middle_thirds(
        cfg.num("set_lo", 0.0), cfg.num("set_hi", 1.0),
        static_cast<int>(cfg.integer("cantor_depth", 10)), de);
  } else if (set == "spectrum") {
    const Frequency freq = cfg.frequency();
    const Potential pot = cfg.potential();
    ScanOptions opts;
    opts.n_iter = cfg.integer("n_iter", opts.n_iter);
    opts.cert_window = static_cast<int>(cfg.integer("cert_window", 400));
    opts.jobs = static_cast<int>(cfg.integer("jobs", 1));
    const double lo = cfg.num("e_min", -2.0 - 2.0 * pot.sup_bound() - 0.2);
    const double hi = cfg.num("e_max", 2.0 + 2.0 * pot.sup_bound() + 0.2);
    const auto gaps = detect_gaps(pot, freq, lo, hi,
                                  static_cast<int>(cfg.integer("scan_grid", 400)),
                                  cfg.num("edge_tol", 1e-6), opts);
    // certified spectral hull by bisection against the outer regions
    auto hyper = [&](double e) {
      return cone_certificate(schrodinger_cocycle(pot, freq, e), opts.cert_grid,
                              opts.cert_window)
          .hyperbolic;
    };
    double a = lo, b = 0.5 * (lo + hi);
    for (int it = 0; it < 40; ++it) {
      const double mid = 0.5 * (a + b);
      (hyper(mid) ? a : b) = mid;
    }
    const double s_lo = 0.5 * (a + b);
    a = 0.5 * (lo + hi), b = hi;
    for (int it = 0; it < 40; ++it) {
      const double mid = 0.5 * (a + b);
      (hyper(mid) ? b : a) = mid;
    }
    const double s_hi = 0.5 * (a + b);
    ind = SpectrumIndicator::from_gaps(s_lo, s_hi, gaps, de);
    detail["gaps"] = nlohmann::json::array();
    for (const auto& g : gaps) {
      nlohmann::json gj{{"lo", g.lo}, {"hi", g.hi}, {"rho", g.rho}};
      if (g.label) gj["m"] = (*g.label)[0];
      detail["gaps"].push_back(std::move(gj));
    }
  } else {
    throw ConfigError("set must be interval, cantor, or spectrum");
  }

  const double nu = homogeneity(ind, resolution);
  nlohmann::json out;
  out["schema"] = "kamred.homog.v1";
  out["set"] = set;
  out["resolution"] = resolution;
  out["grid_de"] = de;
  out["nu"] = nu;
  if (!detail.empty()) out["detail"] = std::move(detail);
  std::string text = cfg.echo("homogeneity") + out.dump(2) + "\n";
  write_output(cfg, text);
  return 0;
}

int cmd_transport(const RunConfig& cfg) {
  const Frequency freq = cfg.frequency();
  const Potential pot = cfg.potential();
  const int lattice = static_cast<int>(cfg.integer("L", 2000));
  const double theta = cfg.num("theta", 0.0);
  std::vector<double> times;
  {
    std::stringstream ss(cfg.str("t_list", "100,200,400"));
    std::string item;
    while (std::getline(ss, item, ',')) times.push_back(std::stod(item));
  }
  InitialState state;
  const std::string kind = cfg.str("state", "delta");
  if (kind == "packet") {
    state.kind = InitialState::Kind::packet;
    state.momentum = cfg.num("momentum", 0.0);
    state.width = cfg.num("width", 10.0);
  } else if (kind != "delta") {
    throw ConfigError("state must be delta or packet");
  }

  const TransportResult res = transport_velocity(pot, freq, theta, lattice, times, state);
  std::string out = cfg.echo("transport") + "T,velocity,second_moment\n";
  for (const auto& p : res.points) {
    out += fmt17(p.T) + "," + fmt17(p.velocity) + "," + fmt17(p.second_moment) + "\n";
  }
  write_output(cfg, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantitative KAM reducibility of quasi-periodic cocycles"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> defines;
  std::string out_path;
  long jobs = -1;
  unsigned long long seed = 0;
  bool seed_set = false;

  for (const char* name : {"rotnum", "kam-reduce", "ids-scan", "homogeneity", "transport"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "key=value configuration file");
    sub->add_option("--out", out_path, "output path (default: stdout)");
    sub->add_option("--jobs", jobs, "worker threads across grid energies");
    sub->add_option("--seed", seed, "seed echoed into outputs")->each([&](const std::string&) {
      seed_set = true;
    });
    sub->add_option("-D,--define", defines, "override config entries as key=value");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string sub = app.get_subcommands().front()->get_name();

  try {
    std::map<std::string, std::string> overrides;
    for (const auto& d : defines) {
      const auto eq = d.find('=');
      if (eq == std::string::npos) throw kamred::ConfigError("--define expects key=value");
      overrides[d.substr(0, eq)] = d.substr(eq + 1);
    }
    if (!out_path.empty()) overrides["out"] = out_path;
    if (jobs >= 0) overrides["jobs"] = std::to_string(jobs);
    if (seed_set) overrides["seed"] = std::to_string(seed);
    const RunConfig cfg = RunConfig::load(config_path, overrides);

    if (sub == "rotnum") return cmd_rotnum(cfg);
    if (sub == "ids-scan") return cmd_ids_scan(cfg);
    if (sub == "kam-reduce") return cmd_kam_reduce(cfg);
    if (sub == "homogeneity") return cmd_homogeneity(cfg);
    if (sub == "transport") return cmd_transport(cfg);
    std::fprintf(stderr, "unknown subcommand\n");
    return 2;
  } catch (const kamred::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const kamred::NonConvergenceError& e) {
    std::fprintf(stderr, "estimator non-convergence: %s\n", e.what());
    return 3;
  } catch (const kamred::SmallnessError& e) {
    std::fprintf(stderr, "entry smallness violated: %s\n", e.what());
    return 4;
  } catch (const kamred::BoundaryContaminationError& e) {
    std::fprintf(stderr, "boundary contamination: %s\n", e.what());
    return 5;
  } catch (const kamred::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 6;
  }
}
