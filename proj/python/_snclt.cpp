#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "snclt/error.hpp"
#include "snclt/harness.hpp"

#include <nlohmann/json.hpp>

namespace py = pybind11;
using namespace snclt;

// Structured values cross the boundary as JSON text; the Python package decodes them.
namespace {

nlohmann::json parse(const std::string& text) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
}

template <class T>
T decode(const std::string& text, const char* what) {
    try {
        return parse(text).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string(what) + ": " + e.what());
    }
}

std::string levels_json(const TruncationLevels& levels, const TruncatedMomentReport& moments) {
    return nlohmann::json{{"levels", levels}, {"moments", moments}}.dump();
}

}  // namespace

PYBIND11_MODULE(_snclt, m) {
    m.doc() = "Self-normalized high-dimensional CLT toolkit";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DegeneracyError>(m, "DegeneracyError", PyExc_ArithmeticError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    m.def("generate_sample",
          [](const std::string& spec, std::size_t n, std::uint64_t seed) {
              return generate_sample(decode<DistributionSpec>(spec, "spec"), n, seed).data;
          },
          py::arg("spec"), py::arg("n"), py::arg("seed"));

    m.def("levels_from_spec",
          [](const std::string& spec, std::size_t n, const std::string& mode) {
              const auto dist = decode<DistributionSpec>(spec, "spec");
              const auto l = solve_levels(dist, n, parse_truncation_mode(mode));
              return levels_json(l, moment_report(dist, l, n));
          },
          py::arg("spec"), py::arg("n"), py::arg("mode") = "per_coordinate");

    m.def("levels_from_data",
          [](const Eigen::MatrixXd& x, std::optional<std::size_t> n, const std::string& mode) {
              const SampleMatrix s{x, std::nullopt};
              const std::size_t nn = n.value_or(s.n());
              const auto l = solve_levels(s, nn, parse_truncation_mode(mode));
              return levels_json(l, moment_report(s, l, nn));
          },
          py::arg("x"), py::arg("n") = py::none(), py::arg("mode") = "per_coordinate");

    m.def("truncate",
          [](const Eigen::MatrixXd& x, const std::string& mode) {
              const SampleMatrix s{x, std::nullopt};
              const auto t = truncate(s, solve_levels(s, s.n(), parse_truncation_mode(mode)));
              return py::make_tuple(t.y, t.truncated);
          },
          py::arg("x"), py::arg("mode") = "per_coordinate",
          "Truncated sample Y and the flag matrix, with levels solved on x.");

    m.def("self_normalized",
          [](const Eigen::MatrixXd& x) {
              const auto s = self_normalized(x);
              return py::make_tuple(s.values, s.max_value, s.argmax);
          },
          py::arg("x"), "Per-coordinate |sum x| / sqrt(sum x^2), its maximum and argmax.");

    m.def("eta", [](const Eigen::MatrixXd& y) { return eta(y).eta; }, py::arg("y"));

    m.def("g", [](double x) {
        const auto v = g_eval(x);
        return py::make_tuple(v.g, v.d1, v.d2);
    }, py::arg("x"), "Smoother value and first two derivatives.");

    m.def("tilted_sum", [](const Eigen::MatrixXd& y) { return tilted_sum(y).max_value; }, py::arg("y"));

    m.def("ustat", [](const Eigen::MatrixXd& y) { return ustat_diagnostics(y).u_max; }, py::arg("y"));

    m.def("sample_max",
          [](const Eigen::MatrixXd& omega, std::size_t draws, std::uint64_t seed, std::size_t workers) {
              return sample_max(make_gaussian_spec(omega), draws, seed, workers);
          },
          py::arg("omega"), py::arg("draws"), py::arg("seed"), py::arg("workers") = 1);

    m.def("max_cdf_diag", &max_cdf_diag, py::arg("t"), py::arg("d"));
    m.def("smoothed_indicator",
          [](const Eigen::VectorXd& x, double eps, double t) { return smoothed_indicator(x, eps, t); },
          py::arg("x"), py::arg("eps"), py::arg("t"));
    m.def("nazarov_band_bound", &nazarov_band_bound, py::arg("eps"), py::arg("d"),
          py::arg("sigma_min") = 1.0);
    m.def("sidak_threshold", &sidak_threshold, py::arg("alpha"), py::arg("d"));

    m.def("bound",
          [](const std::string& inputs) {
              return nlohmann::json(theorem1_bound(decode<BoundInputs>(inputs, "inputs"))).dump();
          },
          py::arg("inputs"));

    m.def("run_ks_cell",
          [](const std::string& config, std::size_t n) {
              const auto c = decode<ExperimentConfig>(config, "config");
              py::gil_scoped_release release;
              return nlohmann::json(run_ks_cell(c, n)).dump();
          },
          py::arg("config"), py::arg("n"));

    m.def("simulate",
          [](const std::string& config, const std::string& format) {
              const auto c = decode<ExperimentConfig>(config, "config");
              const auto f = parse_report_format(format);
              py::gil_scoped_release release;
              std::vector<KSResult> cells;
              for (std::size_t n : c.n_grid) cells.push_back(run_ks_cell(c, n));
              std::optional<RateFit> fit;
              if (cells.size() >= 3) {
                  try {
                      fit = fit_rate(cells);
                  } catch (const ConfigError&) {
                  } catch (const DegeneracyError&) {
                  }
              }
              return render_report(make_report(cells, fit), f);
          },
          py::arg("config"), py::arg("format") = "json");

    m.def("load_report",
          [](const std::string& path) { return render_report(load_report(path), ReportFormat::json); },
          py::arg("path"));
}
