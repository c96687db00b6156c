#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ricci_mmp/scenario.hpp"

namespace py = pybind11;
using namespace ricci_mmp;

namespace {

py::object json_to_py(const Json& j) {
    switch (j.type()) {
        case Json::value_t::null: return py::none();
        case Json::value_t::boolean: return py::bool_(j.get<bool>());
        case Json::value_t::number_integer: return py::int_(j.get<long long>());
        case Json::value_t::number_unsigned: return py::int_(j.get<unsigned long long>());
        case Json::value_t::number_float: return py::float_(j.get<double>());
        case Json::value_t::string: return py::str(j.get<std::string>());
        case Json::value_t::array: {
            py::list out;
            for (const Json& item : j) out.append(json_to_py(item));
            return out;
        }
        case Json::value_t::object: {
            py::dict out;
            for (const auto& [key, value] : j.items()) out[py::str(key)] = json_to_py(value);
            return out;
        }
        default: throw std::runtime_error("unsupported JSON value");
    }
}

Json py_to_json(py::handle h) {
    if (h.is_none()) return nullptr;
    if (py::isinstance<py::bool_>(h)) return h.cast<bool>();
    if (py::isinstance<py::int_>(h)) return h.cast<long long>();
    if (py::isinstance<py::float_>(h)) return h.cast<double>();
    if (py::isinstance<py::str>(h)) return h.cast<std::string>();
    if (py::isinstance<py::list>(h) || py::isinstance<py::tuple>(h)) {
        Json out = Json::array();
        for (py::handle item : h) out.push_back(py_to_json(item));
        return out;
    }
    if (py::isinstance<py::dict>(h)) {
        Json out = Json::object();
        for (auto item : h.cast<py::dict>())
            out[item.first.cast<std::string>()] = py_to_json(item.second);
        return out;
    }
    throw py::type_error("only None/bool/int/float/str/list/tuple/dict convert to JSON");
}

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

ScalarField field_from_array(const Array& a) {
    py::buffer_info info = a.request();
    if (info.ndim != 2 || info.shape[0] != info.shape[1])
        throw py::value_error("field must be a square 2-D array");
    PeriodicGrid g = make_grid(int(info.shape[0]));
    ScalarField f{g, std::vector<double>(size_t(g.n) * size_t(g.n))};
    const double* src = static_cast<const double*>(info.ptr);
    std::copy(src, src + f.values.size(), f.values.begin());
    return f;
}

Array array_from_field(const ScalarField& f) {
    Array a({f.grid.n, f.grid.n});
    std::copy(f.values.begin(), f.values.end(), a.mutable_data());
    return a;
}

Array array_from_vector(const std::vector<double>& v) {
    Array a(py::ssize_t(v.size()));
    std::copy(v.begin(), v.end(), a.mutable_data());
    return a;
}

ToricSurfaceFan fan_from_rays(const std::vector<std::pair<long long, long long>>& rays) {
    std::vector<RayVector> rv;
    rv.reserve(rays.size());
    for (auto [x, y] : rays) rv.push_back({x, y});
    return validate_fan(rv);
}

WeilDivisor divisor_from_strings(const std::vector<std::string>& coeffs) {
    WeilDivisor d;
    for (const std::string& s : coeffs) d.coeffs.push_back(parse_rational(s));
    return d;
}

std::vector<std::string> divisor_to_strings(const WeilDivisor& d) {
    std::vector<std::string> out;
    for (const Rational& c : d.coeffs) out.push_back(format_rational(c));
    return out;
}

py::dict monitor_to_dict(const MonitorSample& s) {
    py::dict d;
    d["t"] = s.t;
    d["volume_ratio_min"] = s.volume_ratio_min;
    d["volume_ratio_max"] = s.volume_ratio_max;
    d["class_mass"] = s.class_mass;
    d["phi_inf"] = s.phi_inf_norm;
    d["phi_dot_inf"] = s.phi_dot_inf_norm;
    d["scal_inf"] = s.scalar_curvature_inf_norm;
    d["fixed_point_gap"] = s.fixed_point_gap;
    return d;
}

py::dict elliptic_to_dict(const EllipticSolution& sol) {
    py::dict d;
    d["phi"] = array_from_field(sol.phi);
    d["c"] = sol.c;
    d["residual"] = sol.residual;
    d["iterations"] = sol.iterations;
    d["min_density"] = sol.min_density;
    d["positive"] = sol.positive;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Discrete Ricci flow laboratory: exact toric MMP with scaling, torus "
              "potential flows, semilinear fixed points, and the axisymmetric sphere flow";

    py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ToricError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const DensityError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const GridError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        }
    });

    // Exact toric layer. Rationals cross the boundary as canonical "p/q" strings.
    m.def(
        "nef_threshold",
        [](const std::vector<std::pair<long long, long long>>& rays,
           const std::vector<std::string>& h) -> py::object {
            auto t = nef_threshold(fan_from_rays(rays), divisor_from_strings(h));
            if (!t) return py::none();
            return py::str(format_rational(*t));
        },
        py::arg("rays"), py::arg("h"),
        "Largest exact rational t with H + t K nef, as a \"p/q\" string.");
    m.def(
        "self_intersections",
        [](const std::vector<std::pair<long long, long long>>& rays) {
            return self_intersections(fan_from_rays(rays)).values;
        },
        py::arg("rays"));
    m.def(
        "canonical_divisor",
        [](const std::vector<std::pair<long long, long long>>& rays) {
            return divisor_to_strings(canonical_divisor(fan_from_rays(rays)));
        },
        py::arg("rays"));
    m.def(
        "is_nef",
        [](const std::vector<std::pair<long long, long long>>& rays,
           const std::vector<std::string>& d) {
            return is_nef(fan_from_rays(rays), divisor_from_strings(d));
        },
        py::arg("rays"), py::arg("d"));
    m.def(
        "is_ample",
        [](const std::vector<std::pair<long long, long long>>& rays,
           const std::vector<std::string>& d) {
            return is_ample(fan_from_rays(rays), divisor_from_strings(d));
        },
        py::arg("rays"), py::arg("d"));
    m.def(
        "mmp_trace",
        [](const std::vector<std::pair<long long, long long>>& rays,
           const std::vector<std::string>& h) {
            MmpPair pair = make_mmp_pair(fan_from_rays(rays), divisor_from_strings(h));
            return json_to_py(trace_to_json(run_mmp_with_scaling(pair)));
        },
        py::arg("rays"), py::arg("h"),
        "Full contraction trace with exact lambda / T per step, as nested dicts.");
    m.def(
        "random_blowup_pair",
        [](unsigned long long seed, int blowups) {
            MmpPair pair = random_blowup_pair(seed, blowups);
            std::vector<std::pair<long long, long long>> rays;
            for (const RayVector& r : pair.fan.rays) rays.emplace_back(r.x, r.y);
            return py::make_tuple(rays, divisor_to_strings(pair.h));
        },
        py::arg("seed"), py::arg("blowups"));

    // Torus fields and elliptic solves. Fields are square row-major arrays on
    // the cell-centered grid x_i = (i + 1/2)/n.
    m.def(
        "build_density",
        [](int n, py::handle spec) {
            return array_from_field(build_density(make_grid(n), density_from_json(py_to_json(spec))));
        },
        py::arg("n"), py::arg("spec"),
        "Tabulates a density spec {constant, modes, zeros, poles} on the n x n grid.");
    m.def(
        "curvature_potential",
        [](int n, py::handle spec) {
            return array_from_field(
                chi_from_density(make_grid(n), density_from_json(py_to_json(spec))));
        },
        py::arg("n"), py::arg("spec"),
        "Closed-form half-Laplacian of log density for a zeros/poles spec.");
    m.def(
        "spectral_laplacian",
        [](const Array& f) { return array_from_field(spectral_laplacian(field_from_array(f))); },
        py::arg("f"));
    m.def(
        "solve_linear_ma",
        [](const Array& g0, const Array& f, double tol) {
            return elliptic_to_dict(solve_linear_ma(field_from_array(g0), field_from_array(f), tol));
        },
        py::arg("g0"), py::arg("f"), py::arg("tol") = 1e-10,
        "Potential phi with g0 + lap(phi)/2 = c F, c fixed by mass.");
    m.def(
        "solve_semilinear_ma",
        [](const Array& chi, const Array& f, double tol) {
            return elliptic_to_dict(
                solve_semilinear_ma(field_from_array(chi), field_from_array(f), tol));
        },
        py::arg("chi"), py::arg("f"), py::arg("tol") = 1e-10,
        "Fixed point chi + lap(phi)/2 = e^phi F (the flow's stationary equation).");

    // Flow drivers, configured by the same strict JSON-shaped dicts the CLI uses.
    m.def(
        "run_flow",
        [](py::handle config, py::object phi0) {
            FlowConfig c = flow_config_from_json(py_to_json(config));
            ScalarField start = phi0.is_none() ? constant_field(c.grid, 0.0)
                                               : field_from_array(phi0.cast<Array>());
            FlowState st = run_flow(c, start);
            py::dict out;
            out["t"] = st.t;
            out["phi"] = array_from_field(st.phi);
            out["phi_dot"] = array_from_field(st.phi_dot);
            py::list monitors;
            for (const MonitorSample& s : st.monitors.samples) monitors.append(monitor_to_dict(s));
            out["monitors"] = monitors;
            return out;
        },
        py::arg("config"), py::arg("phi0") = py::none(),
        "Adaptive implicit flow of the potential; config matches the scenario "
        "\"flow.config\" object.");
    m.def(
        "rough_initial_potential",
        [](py::handle config, py::handle target, double tol) {
            FlowConfig c = flow_config_from_json(py_to_json(config));
            return array_from_field(
                rough_initial_potential(c.grid, c.g0, density_from_json(py_to_json(target)), tol));
        },
        py::arg("config"), py::arg("target"), py::arg("tol") = 1e-8);

    // Sphere flow.
    m.def(
        "run_sphere_flow",
        [](py::handle config) {
            SphereConfig c = sphere_config_from_json(py_to_json(config));
            SphereRunResult run = run_sphere_flow(c);
            py::dict out;
            out["t"] = run.state.t;
            out["v"] = array_from_vector(run.state.v);
            py::list monitors;
            for (const SphereMonitorSample& s : run.monitors.samples) {
                py::dict d;
                d["t"] = s.t;
                d["area"] = s.area;
                d["min_v"] = s.min_v;
                d["max_v"] = s.max_v;
                d["max_abs_K"] = s.max_abs_k;
                d["gauss_bonnet_residual"] = s.gauss_bonnet_residual;
                monitors.append(d);
            }
            out["monitors"] = monitors;
            return out;
        },
        py::arg("config"), "Axisymmetric conformal flow; config matches \"sphere.config\".");
    m.def(
        "sphere_extinction",
        [](py::handle config, double vanish_tol) {
            SphereConfig c = sphere_config_from_json(py_to_json(config));
            ExtinctionReport rep = extinction_experiment(c, vanish_tol);
            py::dict out;
            out["a0"] = rep.a0;
            out["t0_cohomological"] = rep.t0_cohomological;
            out["t_measured"] = rep.t_measured;
            out["rel_error"] = rep.rel_error;
            out["pass"] = rep.pass;
            return out;
        },
        py::arg("config"), py::arg("vanish_tol") = 0.05,
        "Measured extinction time against the area-class prediction A0 / 4 pi.");

    // Scenario runner, same contract as `ricci-mmp run` minus the process exit code.
    m.def(
        "run_scenario",
        [](py::handle doc, const std::string& out_dir, int jobs, const std::string& scenario_dir) {
            RunOptions opt;
            opt.out_dir = out_dir;
            opt.jobs = jobs;
            opt.scenario_dir = scenario_dir;
            ScenarioReport rep = execute_scenario(py_to_json(doc), opt);
            py::dict out;
            out["name"] = rep.name;
            out["kind"] = rep.kind;
            out["paper_ref"] = rep.paper_ref;
            out["checks_passed"] = rep.checks_passed;
            out["notes"] = json_to_py(Json(rep.notes));
            out["details"] = json_to_py(rep.details);
            return out;
        },
        py::arg("doc"), py::arg("out_dir") = ".", py::arg("jobs") = 1,
        py::arg("scenario_dir") = "");
    m.def("suites", [] {
        py::list out;
        for (const SuiteInfo& s : suite_registry()) {
            py::dict d;
            d["name"] = s.name;
            d["result"] = s.result;
            d["summary"] = s.summary;
            d["scenarios"] = s.scenario_files;
            out.append(d);
        }
        return out;
    });
}
