#include <sstream>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dtstop/bounds.hpp"
#include "dtstop/cli.hpp"
#include "dtstop/exit_time.hpp"
#include "dtstop/kernel.hpp"
#include "dtstop/oracle.hpp"
#include "dtstop/skeleton.hpp"

namespace py = pybind11;
using namespace dtstop;

namespace {

std::vector<Increment> to_history(const std::vector<std::tuple<double, int, int>>& h) {
    std::vector<Increment> out;
    out.reserve(h.size());
    for (const auto& [dt, j, s] : h) out.push_back({dt, Mark{j, static_cast<double>(s)}});
    return out;
}

// Runs a configuration given as a JSON string and returns the run record as JSON.
std::string run_json(const std::string& config, int threads, bool write_files) {
    const RunConfig c = parse_config(config, "<python>");
    std::ostringstream sink;
    nlohmann::json record;
    {
        py::gil_scoped_release release;
        record = run(c, sink, threads, write_files);
    }
    return record.dump();
}

}  // namespace

PYBIND11_MODULE(_dtstop, m) {
    m.doc() = "Optimal stopping on the random-walk skeleton of Brownian motion.";
    m.attr("__version__") = version();

    // translators run newest first, so the base class goes first
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<InstanceTooLarge>(m, "InstanceTooLarge", PyExc_RuntimeError);

    py::class_<ExitTimeDistribution>(m, "ExitTime")
        .def(py::init<double>(), py::arg("epsilon"))
        .def_property_readonly("epsilon", &ExitTimeDistribution::epsilon)
        .def_property_readonly("mean", &ExitTimeDistribution::mean)
        .def("density", py::vectorize(&ExitTimeDistribution::density))
        .def("survival", py::vectorize(&ExitTimeDistribution::survival))
        .def("cdf", py::vectorize(&ExitTimeDistribution::cdf))
        .def("survival_quantile", py::vectorize(&ExitTimeDistribution::survival_quantile))
        .def(
            "sample",
            [](const ExitTimeDistribution& d, std::size_t n, std::uint64_t seed) {
                Stream stream(seed, StreamPurpose::skeleton, 0);
                py::array_t<double> out(static_cast<py::ssize_t>(n));
                auto r = out.mutable_unchecked<1>();
                for (std::size_t i = 0; i < n; ++i) r(static_cast<py::ssize_t>(i)) = d.sample(stream);
                return out;
            },
            py::arg("n"), py::arg("seed") = 1);

    m.def(
        "sample_path",
        [](double epsilon, int d, double horizon, std::uint64_t seed, std::uint64_t index) {
            const SkeletonConfig config{epsilon, d, horizon, seed};
            Stream stream(seed, StreamPurpose::skeleton, index);
            const SkeletonPath path = sample_path(config, stream);
            std::vector<std::tuple<double, int, int>> out;
            for (const auto& inc : path.increments)
                out.emplace_back(inc.dt, inc.mark.coordinate, static_cast<int>(inc.mark.sign));
            return out;
        },
        py::arg("epsilon"), py::arg("d") = 1, py::arg("horizon") = 1.0, py::arg("seed") = 1, py::arg("index") = 0,
        "Skeleton increments (dt, coordinate, sign) until the horizon is passed.");

    m.def(
        "transition_density",
        [](double epsilon, int d, const std::vector<std::tuple<double, int, int>>& history, int j, int sign,
           double t) {
            const TransitionKernel kernel(epsilon, d);
            const auto h = to_history(history);
            return kernel.transition_density(history_stats(h, d), j, sign, t);
        },
        py::arg("epsilon"), py::arg("d"), py::arg("history"), py::arg("j"), py::arg("sign"), py::arg("t"));

    m.def(
        "transition_prob",
        [](double epsilon, int d, const std::vector<std::tuple<double, int, int>>& history, int j, int sign, double a,
           double b) {
            const TransitionKernel kernel(epsilon, d);
            const auto h = to_history(history);
            return kernel.transition_prob(history_stats(h, d), j, sign, a, b);
        },
        py::arg("epsilon"), py::arg("d"), py::arg("history"), py::arg("j"), py::arg("sign"), py::arg("a") = 0.0,
        py::arg("b") = INFINITY);

    m.def(
        "plan",
        [](double e1, double beta, bool exact) {
            const Plan p = plan_resolution(e1, beta, PhiSpec{}, 1, 1.0,
                                           exact ? PlanRounding::exact : PlanRounding::printed);
            return py::dict(py::arg("k_star") = p.k_star, py::arg("epsilon") = p.epsilon,
                            py::arg("periods") = p.periods, py::arg("target_root") = p.target_root);
        },
        py::arg("e1"), py::arg("beta"), py::arg("exact") = false);

    m.def("run_json", &run_json, py::arg("config"), py::arg("threads") = 1, py::arg("write_files") = false);
}
