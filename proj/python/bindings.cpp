#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "quench/harness.hpp"
#include "quench/rng.hpp"

namespace py = pybind11;
using namespace quench;

namespace {

Potential::Kind kind_for(const SpinSpace& space) {
    return space.kind == SpinSpace::Kind::Ising ? Potential::Kind::IsingPair
                                                : Potential::Kind::PottsDelta;
}

RunMode parse_mode(const std::string& mode) {
    if (mode == "simulate") return RunMode::Simulate;
    if (mode == "percolation") return RunMode::Percolation;
    if (mode == "lyapunov-audit") return RunMode::Audit;
    if (mode == "classify") return RunMode::Classify;
    throw UsageError("unknown mode '" + mode + "'");
}

} // namespace

PYBIND11_MODULE(_quench, m) {
    m.doc() = "event-driven zero-temperature spin dynamics with a percolation Lyapunov audit";

    py::register_exception<UsageError>(m, "UsageError");
    py::register_exception<Refusal>(m, "Refusal");

    py::class_<TorusLattice>(m, "TorusLattice")
        .def(py::init<std::vector<int>>(), py::arg("dims"))
        .def_property_readonly("n_sites", &TorusLattice::n_sites)
        .def_property_readonly("n_bonds", &TorusLattice::n_bonds)
        .def_property_readonly("dims", &TorusLattice::dims)
        .def("neighbors",
             [](const TorusLattice& lat, Site x) {
                 lat.check_site(x);
                 const auto nb = lat.neighbors(x);
                 return std::vector<Site>(nb.begin(), nb.end());
             })
        .def("coords", &TorusLattice::coords)
        .def("index", [](const TorusLattice& lat, const std::vector<int>& c) {
            return lat.index(c);
        });

    m.def(
        "run_experiment",
        [](const std::string& config_text, const std::string& mode) {
            const ExperimentConfig cfg = ExperimentConfig::parse(config_text);
            return run_experiment(cfg, parse_mode(mode)).to_json();
        },
        py::arg("config_text"), py::arg("mode") = "simulate",
        "run an experiment from config text; returns the report as a JSON string");

    m.def(
        "simulate_events",
        [](const std::string& config_text) {
            ExperimentConfig cfg = ExperimentConfig::parse(config_text);
            cfg.out_dir.clear();
            const TorusLattice lat(cfg.dims);
            const std::uint64_t rep_seed = derive_seed(cfg.seed, Stream::Replicate, 0);
            DisorderSpec spec = cfg.disorder;
            if (!cfg.disorder_seed_fixed) spec.seed = rep_seed;
            const DisorderRealization dis = sample(lat, spec);
            const Potential pot(kind_for(cfg.space), lat, dis, cfg.space);
            const SpinConfig s0 = init_config(lat, cfg.space, cfg.init_weights, rep_seed);
            const Trajectory traj = run(pot, cfg.rule, s0, {cfg.t_max, cfg.event_cap, rep_seed});

            py::dict out;
            std::vector<double> t, dh;
            std::vector<Site> site;
            std::vector<int> oldv, newv;
            for (const FlipEvent& ev : traj.events) {
                t.push_back(ev.t);
                site.push_back(ev.site);
                oldv.push_back(ev.old_value);
                newv.push_back(ev.new_value);
                dh.push_back(ev.delta_h);
            }
            out["t"] = t;
            out["site"] = site;
            out["old"] = oldv;
            out["new"] = newv;
            out["delta_h"] = dh;
            out["end_reason"] = std::string(to_string(traj.end_reason));
            out["end_time"] = traj.end_time;
            return out;
        },
        py::arg("config_text"), "first-replicate trajectory of the configured experiment");

    m.def(
        "sample_disorder",
        [](const std::vector<int>& dims, const std::string& coupling, const std::string& field,
           std::uint64_t seed) {
            const TorusLattice lat(dims);
            const DisorderSpec spec = DisorderSpec::from_strings(coupling, field, seed);
            const DisorderRealization dis = sample(lat, spec);
            return py::make_tuple(dis.j, dis.h);
        },
        py::arg("dims"), py::arg("coupling"), py::arg("field") = "zero", py::arg("seed") = 0,
        "quenched couplings (per bond id) and fields (per site)");

    m.def(
        "k_star",
        [](const std::vector<int>& dims, const std::string& coupling, const std::string& field,
           std::uint64_t seed, int potts_q) {
            const TorusLattice lat(dims);
            const SpinSpace space = potts_q > 0 ? SpinSpace::potts(potts_q) : SpinSpace::ising();
            const DisorderSpec spec = DisorderSpec::from_strings(coupling, field, seed);
            const DisorderRealization dis = sample(lat, spec);
            const Potential pot(kind_for(space), lat, dis, space);
            return k_star_field(pot).k_star;
        },
        py::arg("dims"), py::arg("coupling"), py::arg("field") = "zero", py::arg("seed") = 0,
        py::arg("potts_q") = 0, "brute-force K* per bond id");

    m.def(
        "zero_energy_flip_possible",
        [](double j, double h, int d, int potts_q) {
            const SpinSpace space = potts_q > 0 ? SpinSpace::potts(potts_q) : SpinSpace::ising();
            const Potential::Kind kind =
                potts_q > 0 ? Potential::Kind::PottsDelta : Potential::Kind::IsingPair;
            return zero_energy_flip_possible(kind, space, j, h, d);
        },
        py::arg("j"), py::arg("h"), py::arg("d"), py::arg("potts_q") = 0,
        "parity criterion for homogeneous couplings and fields");

    m.attr("__version__") = "0.1.0";
}
