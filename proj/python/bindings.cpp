#include "ssep/commands.hpp"
#include "ssep/config.hpp"
#include "ssep/errors.hpp"
#include "ssep/oracle.hpp"
#include "ssep/rw_core.hpp"
#include "ssep/stats.hpp"
#include "ssep/theory.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;

namespace
{
    // JSON crosses the boundary as text; the package decodes it
    std::string experiment_json(const std::string& manifest_text, std::int64_t replicas, std::uint64_t seed,
                                int threads)
    {
        const ssep::cli::Manifest m = ssep::cli::parse_manifest(manifest_text, "<python>");
        const double t = m.times().front();
        const auto [x, z] = m.levels(t).front();
        ssep::stats::ExperimentOptions eo;
        eo.threads = threads;
        if (m.profile)
            eo.poisson_lambda = ssep::theory::mean_N_exact(*m.profile, t, z);
        py::gil_scoped_release release;
        return ssep::stats::to_json(ssep::stats::run_experiment(m.sim_config(t, z), replicas, seed, eo)).dump();
    }
}

PYBIND11_MODULE(_ssep, m)
{
    m.doc() = "Exclusion-process extremes: random-walk kernels, closed-form theory, simulation";

    py::register_exception<ssep::DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<ssep::CapabilityError>(m, "CapabilityError", PyExc_NotImplementedError);
    py::register_exception<ssep::TruncationError>(m, "TruncationError", PyExc_ArithmeticError);
    py::register_exception<ssep::ConfigError>(m, "ConfigError", PyExc_ValueError);

    m.def("walk_pmf", &ssep::rw::walk_pmf, py::arg("t"), py::arg("k"));
    m.def("walk_tail", &ssep::rw::walk_tail, py::arg("t"), py::arg("z"));
    m.def("gauss_partial_moment", &ssep::rw::gauss_partial_moment, py::arg("u"), py::arg("beta"));

    py::class_<ssep::Profile>(m, "Profile")
        .def_static("linear", &ssep::Profile::linear, py::arg("d"), py::arg("c") = 1.0, py::arg("r") = 0.0)
        .def_property_readonly("dim", &ssep::Profile::dim)
        .def_property_readonly("beta", &ssep::Profile::beta);

    m.def("level", [](int d, double beta, double t, double x) { return ssep::theory::scaling_for(d, beta, t, x).z; },
          py::arg("d"), py::arg("beta"), py::arg("t"), py::arg("x"));
    m.def("mean_N_exact", &ssep::theory::mean_N_exact, py::arg("profile"), py::arg("t"), py::arg("z"));
    m.def("ss_bound", &ssep::theory::ss_bound, py::arg("profile"), py::arg("t"), py::arg("z"));
    m.def("truncation_depth", &ssep::theory::truncation_depth, py::arg("profile"), py::arg("t"), py::arg("z"),
          py::arg("eps"));
    m.def(
        "duality_occupation",
        [](const ssep::Profile& p, double t, std::vector<std::int64_t> x)
        { return ssep::theory::duality_occupation(p, t, x); },
        py::arg("profile"), py::arg("t"), py::arg("x"));
    m.def("independent_gap", &ssep::theory::independent_gap, py::arg("profile"), py::arg("t"), py::arg("z"),
          py::arg("max_depth") = -1);
    m.def(
        "report_json",
        [](const ssep::Profile& p, double t, double x, double eps)
        { return ssep::theory::to_json(ssep::theory::make_report(p, t, x, eps)).dump(); },
        py::arg("profile"), py::arg("t"), py::arg("x"), py::arg("trunc_eps") = 1e-4);

    m.def(
        "exact_law_of_N",
        [](std::int64_t n, std::vector<std::int64_t> occupied, double t, double z)
        {
            const auto s = ssep::oracle::SmallSystem::segment(n, std::move(occupied));
            return ssep::oracle::law_of_N(s, ssep::oracle::exact_distribution(s, t), z);
        },
        py::arg("n"), py::arg("occupied"), py::arg("t"), py::arg("z"));

    m.def("experiment_json", &experiment_json, py::arg("manifest"), py::arg("replicas"), py::arg("seed"),
          py::arg("threads") = 1);
    m.def(
        "run_command",
        [](const std::string& command, const std::string& manifest_text, const std::filesystem::path& out, bool force)
        {
            static const std::map<std::string, ssep::cli::Command> names{{"theory", ssep::cli::Command::theory},
                                                                         {"simulate", ssep::cli::Command::simulate},
                                                                         {"validate", ssep::cli::Command::validate},
                                                                         {"sweep", ssep::cli::Command::sweep}};
            const auto it = names.find(command);
            if (it == names.end())
                throw ssep::ConfigError("unknown command '" + command + "'");
            ssep::cli::RunOptions ro;
            ro.force = force;
            const auto manifest = ssep::cli::parse_manifest(manifest_text, "<python>");
            py::gil_scoped_release release;
            return ssep::cli::run_command(it->second, manifest, out, ro);
        },
        py::arg("command"), py::arg("manifest"), py::arg("out"), py::arg("force") = false);
}
