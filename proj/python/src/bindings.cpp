#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "tilin/certify.hpp"
#include "tilin/cli.hpp"
#include "tilin/oracle.hpp"

namespace py = pybind11;
using namespace tilin;

namespace {

// Networks are held normalized; bounds and certification need that form.
struct PyNetwork {
  Network net;
};

py::dict relaxation_dict(const ScalarRelaxation& r) {
  py::dict d;
  d["lower"] = py::make_tuple(r.lower.slope, r.lower.intercept);
  d["upper"] = py::make_tuple(r.upper.slope, r.upper.intercept);
  d["anchor"] = r.anchor;
  d["lower_rule"] = to_string(r.lower_rule);
  d["upper_rule"] = to_string(r.upper_rule);
  return d;
}

const char* case_name(PoolCase c) {
  switch (c) {
    case PoolCase::Dominant: return "dominant";
    case PoolCase::Pair: return "pair";
    case PoolCase::Triple: return "triple";
    case PoolCase::Fallback: return "fallback";
  }
  return "?";
}

}  // namespace

PYBIND11_MODULE(_tilin, m) {
  m.doc() = "Robustness certification by tight linear relaxation.";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);

  py::class_<PyNetwork>(m, "Network")
      .def_property_readonly("input_dim", [](const PyNetwork& n) { return n.net.input_dim(); })
      .def_property_readonly("output_dim", [](const PyNetwork& n) { return n.net.output_dim(); })
      .def_property_readonly("widths", [](const PyNetwork& n) { return n.net.widths(); })
      .def("forward", [](const PyNetwork& n, const Vector& x) { return forward(n.net, x); }, py::arg("x"))
      .def("__repr__", [](const PyNetwork& n) {
        std::ostringstream s;
        s << "<tilin.Network " << n.net.input_dim() << " -> " << n.net.output_dim() << ", "
          << n.net.num_layers() << " layers>";
        return s.str();
      });

  m.def("load_network", [](const std::string& path) { return PyNetwork{normalize(load_network(path))}; },
        py::arg("path"));
  m.def("parse_network", [](const std::string& text) {
        return PyNetwork{normalize(parse_network(nlohmann::json::parse(text)))};
      }, py::arg("text"));

  m.def("activation", [](const std::string& kind, double x) {
        const ActivationKind k = parse_activation(kind);
        return py::make_tuple(activation_value(k, x), activation_slope(k, x));
      }, py::arg("kind"), py::arg("x"), "(value, slope)");

  m.def("relax", [](const std::string& kind, double l, double u, double pre, const std::string& policy) {
        return relaxation_dict(relax(parse_activation(kind), l, u, pre, parse_policy(policy)));
      }, py::arg("kind"), py::arg("l"), py::arg("u"), py::arg("pre"), py::arg("policy") = "forward");

  m.def("maxpool_upper", [](const Vector& l, const Vector& u) {
        const PoolUpper p = maxpool_upper(l, u);
        return py::make_tuple(p.coeffs, p.intercept, case_name(p.pool_case));
      }, py::arg("l"), py::arg("u"));

  m.def("compute_bounds",
        [](const PyNetwork& n, const Vector& x, double eps, const std::string& norm, const std::string& policy) {
          py::gil_scoped_release release;
          const NetworkBounds nb = compute_all_bounds(n.net, {x, eps, parse_norm(norm)}, parse_policy(policy));
          std::vector<std::pair<Vector, Vector>> out;
          for (const auto& b : nb.layers) out.emplace_back(b.lower, b.upper);
          return out;
        },
        py::arg("net"), py::arg("x"), py::arg("eps"), py::arg("norm") = "inf", py::arg("policy") = "forward",
        "[(lower, upper)] per layer, entry 0 the input box");

  m.def("certify_json",
        [](const PyNetwork& n, const Vector& x, std::size_t label, const std::string& norm,
           const std::string& policy, double eps0, int iterations) {
          CertificationConfig c;
          c.norm = parse_norm(norm);
          c.policy = parse_policy(policy);
          c.initial_eps = eps0;
          c.iterations = iterations;
          CertificationReport r;
          {
            py::gil_scoped_release release;
            r = certified_radius(n.net, x, label, c);
          }
          return to_json(r, true).dump();
        },
        py::arg("net"), py::arg("x"), py::arg("label"), py::arg("norm") = "inf", py::arg("policy") = "forward",
        py::arg("eps0") = 0.05, py::arg("iterations") = 15);

  m.def("attack_radius",
        [](const PyNetwork& n, const Vector& x, std::size_t label, const std::string& norm, std::uint64_t seed) {
          py::gil_scoped_release release;
          return empirical_attack_radius(n.net, x, label, parse_norm(norm), {}, seed);
        },
        py::arg("net"), py::arg("x"), py::arg("label"), py::arg("norm") = "inf", py::arg("seed") = 0);

  m.def("run_cli", [](std::vector<std::string> args) {
        args.insert(args.begin(), "tilin");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      }, py::arg("args"), "(exit code, stdout, stderr)");
}
