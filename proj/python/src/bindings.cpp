#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "flatcrit/cli.hpp"
#include "flatcrit/error.hpp"
#include "flatcrit/inducing.hpp"
#include "flatcrit/map_model.hpp"
#include "flatcrit/stats.hpp"
#include "flatcrit/thermo.hpp"

namespace py = pybind11;
using namespace flatcrit;

namespace {

using MapPtr = std::shared_ptr<FlatUnimodalMap>;

MapSpec spec_from(const std::string& family, double alpha, double v0, double c, double surgery_radius,
                  double endpoint_slope) {
  MapSpec s;
  s.family = parse_family(family);
  s.alpha = alpha;
  s.v0 = v0;
  s.c = c;
  s.surgery_radius = surgery_radius;
  s.endpoint_slope = endpoint_slope;
  return s;
}

py::dict branch_dict(const FlatUnimodalMap& f, const Branch& b) {
  py::dict d;
  d["R"] = b.R;
  d["side"] = b.side == Side::Left ? "left" : "right";
  d["lo"] = f.to_plain(b.lo);
  d["hi"] = f.to_plain(b.hi);
  d["log_measure"] = b.log_measure;
  d["log_df_min"] = b.log_df_min();
  d["log_df_max"] = b.log_df_max();
  return d;
}

py::dict bracket_dict(const PressureBracket& P) {
  py::dict d;
  d["t"] = P.t;
  d["lo"] = P.lo;
  d["hi"] = P.hi;
  d["truncation_error"] = P.truncation_error;
  d["depth"] = P.depth;
  return d;
}

py::dict fit_dict(const LinearFit& f) {
  py::dict d;
  d["slope"] = f.slope;
  d["intercept"] = f.intercept;
  d["r2"] = f.r2;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Flat-critical unimodal maps: inducing schemes, pressure and statistics.";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result(
      [&]() { return py::object(py::exception<Error>(m, "FlatcritError", PyExc_RuntimeError)); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const py::object& type = error_type.get_stored();
      py::object exc = type(py::str(e.what()));
      exc.attr("kind") = py::str(std::string(to_string(e.kind())));
      PyErr_SetObject(type.ptr(), exc.ptr());
    }
  });

  py::class_<FlatUnimodalMap, MapPtr>(m, "Map")
      .def(py::init([](const std::string& family, double alpha, double v0, double c, double surgery_radius,
                       double endpoint_slope) {
             return std::make_shared<FlatUnimodalMap>(
                 spec_from(family, alpha, v0, c, surgery_radius, endpoint_slope));
           }),
           py::arg("family") = "chebyshev", py::arg("alpha") = 1.0, py::arg("v0") = 0.4, py::arg("c") = 0.5,
           py::arg("surgery_radius") = 0.05, py::arg("endpoint_slope") = 4.0)
      .def_property_readonly("family", [](const FlatUnimodalMap& f) { return std::string(family_name(f.spec().family)); })
      .def_property_readonly("fingerprint", &FlatUnimodalMap::fingerprint)
      .def_property_readonly("c", &FlatUnimodalMap::c)
      .def_property_readonly("is_flat", &FlatUnimodalMap::is_flat)
      .def("__call__", &FlatUnimodalMap::value, py::arg("x"))
      .def("deficit", &FlatUnimodalMap::deficit, py::arg("x"), "1 - f(x) at full precision.")
      .def("log_derivative",
           [](const FlatUnimodalMap& f, double x) { return f.log_derivative(f.from_plain(x)); }, py::arg("x"))
      .def("misiurewicz", [](const FlatUnimodalMap& f, int depth, int period_bound) {
        const MisiurewiczReport r = misiurewicz_report(f, depth, period_bound);
        py::dict d;
        d["pass"] = r.pass();
        d["postcritical_min_distance"] = r.postcritical_min_distance;
        d["min_log_multiplier"] = r.min_log_multiplier;
        return d;
      }, py::arg("depth") = 100, py::arg("period_bound") = 6);

  py::class_<NiceInterval>(m, "NiceInterval")
      .def_readonly("a_minus", &NiceInterval::a_minus)
      .def_readonly("a_plus", &NiceInterval::a_plus)
      .def_readonly("tau", &NiceInterval::tau)
      .def_readonly("K_tau", &NiceInterval::K_tau)
      .def("__repr__", [](const NiceInterval& I) {
        std::ostringstream os;
        os << "NiceInterval(" << I.a_minus << ", " << I.a_plus << ")";
        return os.str();
      });
  m.def("nice_interval", [](const MapPtr& f) { return nice_interval(*f); }, py::arg("map"));

  py::class_<InducingScheme>(m, "Scheme")
      .def_readonly("n_max", &InducingScheme::n_max)
      .def_readonly("interval", &InducingScheme::interval)
      .def_readonly("unresolved_mass", &InducingScheme::unresolved_mass)
      .def_readonly("log_tail", &InducingScheme::log_tail)
      .def("__len__", [](const InducingScheme& S) { return S.branches.size(); })
      .def("branches", [](const InducingScheme& S) {
        py::list out;
        for (const Branch& b : S.branches) out.append(branch_dict(*S.map, b));
        return out;
      })
      .def("to_json", &scheme_to_json);
  m.def("build_scheme",
        [](const MapPtr& f, int n_max, double tol) {
          py::gil_scoped_release release;
          return build_scheme(std::shared_ptr<const FlatUnimodalMap>(f), nice_interval(*f), n_max, tol);
        },
        py::arg("map"), py::arg("n_max") = 2000, py::arg("tol") = 1e-13);

  m.def("tail_statistics", [](const InducingScheme& S) {
    const TailTable T = tail_statistics(S);
    py::dict d;
    std::vector<int> n, count;
    std::vector<double> log_tail;
    for (const TailRow& r : T.rows) {
      n.push_back(r.n);
      count.push_back(r.count);
      log_tail.push_back(r.log_tail);
    }
    d["n"] = n;
    d["count"] = count;
    d["log_tail"] = log_tail;
    d["polynomial"] = fit_dict(T.polynomial);
    d["stretched"] = fit_dict(T.stretched);
    d["stretched_exponent"] = T.stretched_exponent;
    d["tail_ratio"] = T.tail_ratio;
    d["max_partition_residual"] = T.max_partition_residual;
    return d;
  }, py::arg("scheme"));

  py::class_<TransferModel>(m, "TransferModel")
      .def(py::init([](const InducingScheme& S, int nodes) {
             TransferOptions o;
             o.nodes = nodes;
             py::gil_scoped_release release;
             return std::make_unique<TransferModel>(S, o);
           }),
           py::arg("scheme"), py::arg("nodes") = 32)
      .def("solve_pressure",
           [](const TransferModel& M, double t, int depth) {
             py::gil_scoped_release release;
             return M.solve_pressure(t, depth);
           },
           py::arg("t"), py::arg("depth") = 8)
      .def("equilibrium", [](const TransferModel& M, double t, int depth, const std::vector<std::string>& obs) {
        const EquilibriumReport r = M.equilibrium_report(t, depth, parse_observables(obs));
        py::dict d;
        d["P"] = bracket_dict(r.P);
        d["chi"] = r.chi;
        d["entropy"] = r.entropy;
        d["mean_return"] = r.mean_return;
        d["identity_residual"] = r.identity_residual;
        d["expectations"] = r.observable_expectations;
        return d;
      }, py::arg("t"), py::arg("depth") = 8, py::arg("observables") = std::vector<std::string>{})
      .def("freeze_scan", [](const TransferModel& M, const std::vector<double>& grid, int depth) {
        const FreezeReport r = M.freeze_scan(grid, depth);
        py::dict d;
        py::list rows;
        for (const FreezeRow& row : r.rows) {
          py::dict x = bracket_dict(row.P);
          x["sign"] = std::string(sign_name(row.sign));
          rows.append(x);
        }
        d["rows"] = rows;
        d["t_plus"] = r.t_plus_found ? py::object(py::float_(r.t_plus)) : py::object(py::none());
        d["acim_integral"] = r.acim_integral;
        return d;
      }, py::arg("t_grid"), py::arg("depth") = 8);

  py::class_<PressureBracket>(m, "PressureBracket")
      .def_readonly("t", &PressureBracket::t)
      .def_readonly("lo", &PressureBracket::lo)
      .def_readonly("hi", &PressureBracket::hi)
      .def_readonly("truncation_error", &PressureBracket::truncation_error)
      .def_property_readonly("mid", &PressureBracket::mid)
      .def_property_readonly("width", &PressureBracket::width)
      .def("__contains__", &PressureBracket::contains);

  m.def("birkhoff_average",
        [](const MapPtr& f, const std::string& obs, std::uint64_t seed, long burn_in, long N) {
          const Observable phi = parse_observable(obs);
          py::gil_scoped_release release;
          return birkhoff_average(*f, phi, seed, burn_in, N);
        },
        py::arg("map"), py::arg("observable"), py::arg("seed") = 1, py::arg("burn_in") = 1000,
        py::arg("N") = 1'000'000);

  m.def("correlations",
        [](const MapPtr& f, const std::string& phi, const std::string& psi, int n_max, std::uint64_t seed, long N,
           int fit_n_min) {
          const Observable a = parse_observable(phi), b = parse_observable(psi);
          CorrelationSeries s;
          {
            py::gil_scoped_release release;
            s = correlation_series(*f, a, b, n_max, seed, N, {});
          }
          py::dict d;
          d["lags"] = s.lags;
          d["cor"] = s.cor;
          d["noise_floor"] = s.noise_floor;
          try {
            const DecayFit fit = decay_fit(s, kAllDecayModels, fit_n_min);
            py::dict best;
            best["model"] = std::string(decay_model_name(fit.best.model));
            best["param"] = fit.best.param;
            best["r2"] = fit.best.r2;
            d["fit"] = best;
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::InsufficientSignal) throw;
            d["fit"] = py::none();
          }
          return d;
        },
        py::arg("map"), py::arg("phi") = "x", py::arg("psi") = "x", py::arg("n_max") = 200, py::arg("seed") = 1,
        py::arg("N") = 1'000'000, py::arg("fit_n_min") = 10);

  m.def("clt",
        [](const MapPtr& f, const std::string& obs, long N, int samples, std::uint64_t seed) {
          const Observable phi = parse_observable(obs);
          CltReport r;
          {
            py::gil_scoped_release release;
            r = clt_test(*f, phi, N, samples, seed);
          }
          py::dict d;
          d["mean"] = r.mean;
          d["sigma2"] = r.sigma2;
          d["ks_distance"] = r.ks_distance;
          d["coboundary"] = r.coboundary;
          d["green_kubo_sigma2"] = r.green_kubo_sigma2;
          return d;
        },
        py::arg("map"), py::arg("observable"), py::arg("N") = 10'000, py::arg("samples") = 1000,
        py::arg("seed") = 1);

  m.def("parse_config", [](const std::string& text) { return canonical_config(parse_config(text)); },
        py::arg("text"), "Validate a JSON config and return its canonical form.");
  m.def("config_hash", [](const std::string& text) { return config_hash(parse_config(text)); }, py::arg("text"));
  m.def("execute",
        [](const std::string& text, const std::string& command, const std::string& out_dir) {
          RunConfig c = parse_config(text);
          if (!out_dir.empty()) c.outputs.dir = out_dir;
          const Command cmd = parse_command(command);
          std::ostringstream log;
          int rc = 0;
          {
            py::gil_scoped_release release;
            rc = execute(c, cmd, log);
          }
          return py::make_tuple(rc, log.str());
        },
        py::arg("config"), py::arg("command"), py::arg("out_dir") = "",
        "Run a pipeline command; returns (exit status, log text).");
}
