// Python bindings for the main operations: Fourier maps, cocycle estimators,
// the KAM iteration, and the spectral applications.

#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kamred/errors.hpp"
#include "kamred/kam.hpp"
#include "kamred/schrodinger.hpp"

namespace py = pybind11;
using namespace kamred;

namespace {

Mode mode_from_list(const std::vector<int>& n) {
  Mode m;
  for (std::size_t i = 0; i < n.size() && i < 3; ++i) m[static_cast<int>(i)] = n[i];
  return m;
}

using MatrixRows = std::vector<std::vector<Complex>>;

Mat2c mat_from_rows(const MatrixRows& rows) {
  if (rows.size() != 2 || rows[0].size() != 2 || rows[1].size() != 2) {
    throw ConfigError("matrix argument must be a 2x2 nested list");
  }
  Mat2c m;
  m << rows[0][0], rows[0][1], rows[1][0], rows[1][1];
  return m;
}

MatrixRows rows_from_mat(const Mat2c& m) {
  return {{m(0, 0), m(0, 1)}, {m(1, 0), m(1, 1)}};
}

MatrixRows rows_from_mat(const Mat2d& m) { return rows_from_mat(Mat2c(m.cast<Complex>())); }

Potential make_potential(const std::string& kind, double coupling,
                         const std::map<int, double>& coeffs) {
  if (kind == "amo") return Potential::amo(coupling);
  if (kind == "cosine-sum") {
    Potential p;
    p.series.dim = 1;
    p.coupling = coupling;
    for (const auto& [n, a] : coeffs) {
      p.series.coeffs[Mode(n)] += 0.5 * a;
      p.series.coeffs[Mode(-n)] += 0.5 * a;
    }
    return p;
  }
  throw ConfigError("potential kind must be amo or cosine-sum");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "quantitative KAM reducibility of quasi-periodic SL(2,R) cocycles";

  py::register_exception<Error>(m, "KamredError");

  py::class_<FourierMap>(m, "FourierMap")
      .def(py::init([](int dim, const std::string& period) {
             return FourierMap(dim, period == "2torus" ? Period::double_torus : Period::torus,
                               Algebra::gl2c);
           }),
           py::arg("dim") = 1, py::arg("period") = "torus")
      .def("set_coeff",
           [](FourierMap& f, const std::vector<int>& n, const MatrixRows& c) {
             f.set_coeff(mode_from_list(n), mat_from_rows(c));
           })
      .def("coeff",
           [](const FourierMap& f, const std::vector<int>& n) {
             return rows_from_mat(f.coeff(mode_from_list(n)));
           })
      .def("evaluate",
           [](const FourierMap& f, double theta) { return rows_from_mat(f.evaluate(theta)); })
      .def("strip_norm", &FourierMap::strip_norm, py::arg("h"))
      .def("ck_norm", &FourierMap::ck_norm, py::arg("k"), py::arg("grid_per_dim") = 512)
      .def("truncate", &FourierMap::truncate, py::arg("order"))
      .def("max_abs_mode", &FourierMap::max_abs_mode)
      .def("__len__", &FourierMap::size)
      .def("to_json", [](const FourierMap& f) { return fourier_to_json(f); })
      .def_static("from_json", [](const std::string& s) { return fourier_from_json(s); });

  m.def("smooth_approximate",
        [](const FourierMap& f, int j) { return smooth_approximate(f, j, ApproxParams{}); },
        py::arg("f"), py::arg("j"));

  py::class_<Frequency>(m, "Frequency")
      .def(py::init([](double alpha, double kappa, double tau) {
             Eigen::VectorXd a(1);
             a << alpha;
             return Frequency(a, kappa, tau);
           }),
           py::arg("alpha"), py::arg("kappa") = 0.2, py::arg("tau") = 1.5)
      .def_static("golden", &Frequency::golden, py::arg("kappa") = 0.2, py::arg("tau") = 1.5)
      .def_property_readonly("alpha", [](const Frequency& f) { return f.alpha[0]; });

  m.def("diophantine_check", &diophantine_check, py::arg("freq"), py::arg("n_max"));

  py::class_<Potential>(m, "Potential")
      .def(py::init(&make_potential), py::arg("kind") = "amo", py::arg("coupling") = 0.0,
           py::arg("coeffs") = std::map<int, double>{})
      .def("value", [](const Potential& p, double theta) { return p.value(theta); })
      .def("sup_bound", &Potential::sup_bound);

  py::class_<Cocycle>(m, "Cocycle")
      .def("value",
           [](const Cocycle& c, double theta) { return rows_from_mat(c.value(theta)); });

  m.def("schrodinger_cocycle", &schrodinger_cocycle, py::arg("potential"), py::arg("freq"),
        py::arg("energy"));
  m.def("rotation_number", &rotation_number, py::arg("cocycle"), py::arg("n_iter") = 100000);
  m.def("lyapunov_exponent", &lyapunov_exponent, py::arg("cocycle"), py::arg("n_iter") = 10000,
        py::arg("phases") = 32);
  m.def("is_uniformly_hyperbolic", &is_uniformly_hyperbolic, py::arg("cocycle"));
  m.def("ids", &ids, py::arg("potential"), py::arg("freq"), py::arg("energy"),
        py::arg("n_iter") = 100000);
  m.def("counting_ids", &counting_ids, py::arg("potential"), py::arg("freq"), py::arg("energy"),
        py::arg("size") = 2000, py::arg("theta0") = 0.0);

  m.def(
      "reduce",
      [](const Potential& pot, const Frequency& freq, double energy) {
        const SchrodingerPerturbation pert = schrodinger_perturbation(pot, energy);
        const ReducibilityReport rep =
            run_iteration(ConstantCocycle(pert.A), pert.f, freq, KamSchedule{},
                          RotClassParams{});
        return report_to_json(rep);
      },
      py::arg("potential"), py::arg("freq"), py::arg("energy"),
      "Run the KAM iteration on the Schrodinger cocycle; returns the report JSON.");

  m.def(
      "transport",
      [](const Potential& pot, const Frequency& freq, double theta, int lattice,
         const std::vector<double>& times) {
        const TransportResult res =
            transport_velocity(pot, freq, theta, lattice, times, InitialState{});
        py::list out;
        for (const auto& p : res.points) {
          py::dict d;
          d["T"] = p.T;
          d["velocity"] = p.velocity;
          d["second_moment"] = p.second_moment;
          d["speed"] = p.speed;
          out.append(std::move(d));
        }
        return out;
      },
      py::arg("potential"), py::arg("freq"), py::arg("theta") = 0.0, py::arg("lattice") = 500,
      py::arg("times") = std::vector<double>{50.0});
}
