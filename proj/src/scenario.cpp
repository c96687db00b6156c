#include "ricci_mmp/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <random>
#include <thread>

namespace ricci_mmp {
namespace {

constexpr double kTwoPi = 2.0 * M_PI;

[[noreturn]] void schema_fail(const std::string& where, const std::string& what) {
    throw SchemaError(where + ": " + what);
}

double get_number(const Json& j, const std::string& key, double fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) schema_fail(where + "." + key, "expected a number");
    return j[key].get<double>();
}

long long get_integer(const Json& j, const std::string& key, long long fallback,
                      const std::string& where) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer()) schema_fail(where + "." + key, "expected an integer");
    return j[key].get<long long>();
}

bool get_bool(const Json& j, const std::string& key, bool fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_boolean()) schema_fail(where + "." + key, "expected a boolean");
    return j[key].get<bool>();
}

std::string get_string(const Json& j, const std::string& key, const std::string& fallback,
                       const std::string& where) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_string()) schema_fail(where + "." + key, "expected a string");
    return j[key].get<std::string>();
}

std::vector<double> number_array(const Json& j, const std::string& where) {
    if (!j.is_array()) schema_fail(where, "expected an array of numbers");
    std::vector<double> out;
    for (const Json& x : j) {
        if (!x.is_number()) schema_fail(where, "expected numbers only");
        out.push_back(x.get<double>());
    }
    return out;
}

// Runs fn(0..count-1) on up to `jobs` worker threads. Each index writes only
// its own slot, so the result is identical to the sequential order.
template <class Fn>
void parallel_for(int count, int jobs, const Fn& fn) {
    jobs = std::min(jobs, count);
    if (jobs <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    pool.reserve(size_t(jobs));
    for (int w = 0; w < jobs; ++w)
        pool.emplace_back([&] {
            for (;;) {
                int i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

struct Checks {
    std::vector<std::string> notes;
    bool all = true;
    void add(bool ok, const std::string& what) {
        all = all && ok;
        notes.push_back(std::string(ok ? "PASS " : "FAIL ") + what);
    }
    void info(const std::string& line) { notes.push_back(line); }
};

std::string artifact_path(const RunOptions& opt, const std::string& name,
                          const std::string& suffix) {
    return (std::filesystem::path(opt.out_dir) / (name + suffix)).string();
}

}  // namespace

// ---------------------------------------------------------------- flow parsing

FlowConfig flow_config_from_json(const Json& j) {
    require_keys(j,
                 {"n"},
                 {"mode", "g0", "f", "chi", "t_end", "newton_tol", "step_tol", "dt_init", "dt_min",
                  "dt_max", "fd_laplacian", "perturbation"},
                 "flow.config");
    FlowConfig c;
    try {
        c.grid = make_grid(int(get_integer(j, "n", 0, "flow.config")));
    } catch (const GridError& e) {
        schema_fail("flow.config.n", e.what());
    }
    std::string mode = get_string(j, "mode", "unnormalized", "flow.config");
    if (mode == "unnormalized")
        c.mode = FlowMode::Unnormalized;
    else if (mode == "normalized")
        c.mode = FlowMode::Normalized;
    else
        schema_fail("flow.config.mode", "expected \"unnormalized\" or \"normalized\"");
    if (j.contains("g0")) c.g0 = density_from_json(j["g0"]);
    if (j.contains("f")) c.bigF = density_from_json(j["f"]);
    if (j.contains("chi")) {
        c.chi_mode = ChiMode::Prescribed;
        ScalarField chi = build_density(c.grid, density_from_json(j["chi"]));
        if (!(field_min(chi) > 0))
            schema_fail("flow.config.chi", "prescribed density must be positive on the grid");
        c.prescribed_chi = std::move(chi);
    }
    c.t_end = get_number(j, "t_end", c.t_end, "flow.config");
    c.newton_tol = get_number(j, "newton_tol", c.newton_tol, "flow.config");
    c.step_tol = get_number(j, "step_tol", c.step_tol, "flow.config");
    c.dt_init = get_number(j, "dt_init", c.dt_init, "flow.config");
    c.dt_min = get_number(j, "dt_min", c.dt_min, "flow.config");
    c.dt_max = get_number(j, "dt_max", c.dt_max, "flow.config");
    c.use_fd_laplacian = get_bool(j, "fd_laplacian", false, "flow.config");
    if (j.contains("perturbation")) {
        const Json& p = j["perturbation"];
        require_keys(p, {}, {"s", "w", "r", "delta"}, "flow.config.perturbation");
        c.perturbation.s = get_number(p, "s", 0.0, "flow.config.perturbation");
        c.perturbation.w = get_number(p, "w", 0.0, "flow.config.perturbation");
        c.perturbation.r = get_number(p, "r", 0.0, "flow.config.perturbation");
        c.perturbation.delta = get_number(p, "delta", 0.0, "flow.config.perturbation");
    }
    return c;
}

namespace {

ScalarField phi0_from_json(const FlowConfig& c, const Json& j) {
    if (j.is_null()) return constant_field(c.grid, 0.0);
    std::string type = get_string(j, "type", "", "flow.phi0");
    if (type == "zero") {
        require_keys(j, {"type"}, {}, "flow.phi0");
        return constant_field(c.grid, 0.0);
    }
    if (type == "rough") {
        require_keys(j, {"type", "target"}, {"tol"}, "flow.phi0");
        return rough_initial_potential(c.grid, c.g0, density_from_json(j["target"]),
                                       get_number(j, "tol", 1e-8, "flow.phi0"));
    }
    if (type == "smooth") {
        require_keys(j, {"type", "target", "j"}, {"tol"}, "flow.phi0");
        return smooth_approximation_sequence(c.grid, c.g0, density_from_json(j["target"]),
                                             int(get_integer(j, "j", 0, "flow.phi0")),
                                             get_number(j, "tol", 1e-8, "flow.phi0"));
    }
    if (type == "modes") {
        require_keys(j, {"type", "modes"}, {}, "flow.phi0");
        DensitySpec carrier;  // reuse the strict trig-mode parser
        Json wrapper = Json{{"modes", j["modes"]}};
        carrier = density_from_json(wrapper);
        std::vector<TrigMode> modes = carrier.smooth.modes;
        return tabulate(c.grid, [&](double x, double y) {
            double v = 0.0;
            for (const TrigMode& m : modes) {
                double u = kTwoPi * (m.kx * x + m.ky * y);
                v += m.a_cos * std::cos(u) + m.a_sin * std::sin(u);
            }
            return v;
        });
    }
    schema_fail("flow.phi0.type", "expected \"zero\", \"rough\", \"smooth\", or \"modes\"");
}

double chi_integral(const FlowConfig& c) {
    if (c.chi_mode == ChiMode::Prescribed) return field_integral(*c.prescribed_chi);
    return field_integral(chi_from_density(c.grid, c.bigF));
}

// The exact discrete class law: the Laplacian contributes nothing to the
// integral, so the class mass follows the background interpolation alone.
double class_linearity_deviation(const MonitorLog& log, FlowMode mode, double int_chi) {
    if (log.samples.empty()) return 0.0;
    double m0 = log.samples.front().class_mass;
    double dev = 0.0;
    for (const MonitorSample& s : log.samples) {
        double law = mode == FlowMode::Unnormalized
                         ? m0 + s.t * int_chi
                         : std::exp(-s.t) * m0 + (1.0 - std::exp(-s.t)) * int_chi;
        dev = std::max(dev, std::abs(s.class_mass - law));
    }
    return dev;
}

void check_class_linearity(Checks& checks, Json& details, const std::string& label,
                           const MonitorLog& log, FlowMode mode, double int_chi) {
    double dev = class_linearity_deviation(log, mode, int_chi);
    double bound = 1e-10 * std::abs(log.samples.empty() ? 1.0 : log.samples.front().class_mass);
    checks.add(dev <= bound, "class mass follows the exact law (" + label + ": deviation " +
                                 format_full(dev) + " <= " + format_full(bound) + ")");
    details["class_linearity"][label] = {{"deviation", dev}, {"bound", bound}};
}

// ------------------------------------------------------------------ mmp tasks

void expect_rational_list(Checks& checks, const Json& expect, const std::string& key,
                          const std::vector<Rational>& got) {
    if (!expect.contains(key)) return;
    const Json& arr = expect[key];
    if (!arr.is_array()) schema_fail("mmp.expect." + key, "expected an array of \"p/q\" strings");
    bool ok = arr.size() == got.size();
    std::string want_text, got_text;
    for (size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_string()) schema_fail("mmp.expect." + key, "expected \"p/q\" strings");
        want_text += (i ? " " : "") + arr[i].get<std::string>();
        if (ok && parse_rational(arr[i].get<std::string>()) != got[i]) ok = false;
    }
    for (size_t i = 0; i < got.size(); ++i) got_text += (i ? " " : "") + format_rational(got[i]);
    checks.add(ok, key + " = [" + got_text + "] (expected [" + want_text + "])");
}

void run_mmp_trace(const Json& payload, const RunOptions& opt, const std::string& name,
                   const std::string& paper_ref, Checks& checks, Json& details, bool dry) {
    require_keys(payload, {"task", "fan", "h"}, {"expect"}, "mmp");
    ToricSurfaceFan fan = fan_from_json(payload["fan"]);
    WeilDivisor h = divisor_from_json(payload["h"]);
    Json expect = payload.value("expect", Json::object());
    require_keys(expect, {}, {"lambda", "T", "kinds", "terminal", "steps"}, "mmp.expect");
    if (dry) return;

    MmpPair pair = make_mmp_pair(std::move(fan), std::move(h));
    MmpTrace trace = run_mmp_with_scaling(pair);

    std::vector<Rational> lambdas, times;
    std::vector<std::string> kinds;
    for (const MmpStep& s : trace.steps) {
        lambdas.push_back(s.lambda);
        times.push_back(s.T);
        kinds.push_back(contraction_type_name(s.kind.type));
    }
    expect_rational_list(checks, expect, "lambda", lambdas);
    expect_rational_list(checks, expect, "T", times);
    if (expect.contains("steps"))
        checks.add(int(trace.steps.size()) == get_integer(expect, "steps", -1, "mmp.expect"),
                   "step count " + std::to_string(trace.steps.size()));
    if (expect.contains("kinds")) {
        std::vector<std::string> want;
        for (const Json& k : expect["kinds"]) {
            if (!k.is_string()) schema_fail("mmp.expect.kinds", "expected strings");
            want.push_back(k.get<std::string>());
        }
        std::string got_text;
        for (size_t i = 0; i < kinds.size(); ++i) got_text += (i ? " " : "") + kinds[i];
        checks.add(want == kinds, "kinds = [" + got_text + "]");
    }
    if (expect.contains("terminal")) {
        std::string want = expect["terminal"].get<std::string>();
        checks.add(terminal_state_name(trace.terminal) == want,
                   "terminal = " + terminal_state_name(trace.terminal));
    }

    Json artifact = trace_to_json(trace);
    artifact["paper_ref"] = paper_ref;
    write_json_file(artifact_path(opt, name, "_trace.json"), artifact);
    details["trace"] = trace_to_json(trace);
    details["table"] = render_trace_table(trace);
}

void run_mmp_corpus(const Json& payload, const RunOptions& opt, const std::string& name,
                    const std::string& paper_ref, unsigned long long seed, int jobs, Checks& checks,
                    Json& details, bool dry) {
    require_keys(payload, {"task", "count", "blowups", "checks"}, {}, "mmp");
    int count = int(get_integer(payload, "count", 0, "mmp"));
    int blowups = int(get_integer(payload, "blowups", 0, "mmp"));
    if (count < 1) schema_fail("mmp.count", "need at least one corpus member");
    if (blowups < 1) schema_fail("mmp.blowups", "need at least one blow-up");
    bool want_rationality = false, want_timeline = false;
    if (!payload["checks"].is_array()) schema_fail("mmp.checks", "expected an array");
    for (const Json& c : payload["checks"]) {
        std::string s = c.is_string() ? c.get<std::string>() : "";
        if (s == "rationality")
            want_rationality = true;
        else if (s == "timeline")
            want_timeline = true;
        else
            schema_fail("mmp.checks", "expected \"rationality\" or \"timeline\"");
    }
    if (dry) return;

    std::vector<std::string> failures(static_cast<size_t>(count));
    parallel_for(count, jobs, [&](int i) {
        MmpPair pair = random_blowup_pair(seed + (unsigned long long)(i), blowups);
        std::string problems;
        if (want_rationality) {
            WeilDivisor k = canonical_divisor(pair.fan);
            auto tstar = nef_threshold(pair.fan, pair.h);
            if (!tstar) {
                problems += "no threshold;";
            } else {
                WeilDivisor at = add(pair.h, scale(*tstar, k));
                WeilDivisor past = add(pair.h, scale(*tstar + Rational(1, 1000), k));
                if (!is_nef(pair.fan, at)) problems += "not nef at threshold;";
                if (is_nef(pair.fan, past)) problems += "nef past threshold;";
            }
        }
        if (want_timeline) {
            MmpTrace tr = run_mmp_with_scaling(pair);
            if (tr.terminal == TerminalState::NotGoodDivisor) problems += "trace aborted;";
            Rational prev = 0;
            int divisorial = 0;
            for (const MmpStep& s : tr.steps) {
                if (s.T != prev + Rational(1) / s.lambda) problems += "timeline recursion broken;";
                prev = s.T;
                if (s.kind.type == ContractionType::Divisorial) ++divisorial;
                if (s.pair_after && !is_ample(s.pair_after->fan, s.pair_after->h))
                    problems += "pushed divisor not ample;";
            }
            if (divisorial > pair.fan.size() - 3) problems += "too many divisorial steps;";
        }
        failures[size_t(i)] = problems;
    });

    int bad = 0;
    Json failed = Json::array();
    for (int i = 0; i < count; ++i)
        if (!failures[size_t(i)].empty()) {
            ++bad;
            failed.push_back({{"seed", seed + (unsigned long long)(i)}, {"problems", failures[size_t(i)]}});
        }
    if (want_rationality)
        checks.add(bad == 0, "exact nef thresholds verified on " + std::to_string(count) +
                                 " fans (re-checked at t* and t* + 1/1000)");
    if (want_timeline)
        checks.add(bad == 0, "timeline law, step budget, and ampleness hold on " +
                                 std::to_string(count) + " traces");
    details["corpus"] = {{"count", count}, {"blowups", blowups}, {"failures", failed}};
    Json artifact = details["corpus"];
    artifact["paper_ref"] = paper_ref;
    write_json_file(artifact_path(opt, name, "_corpus.json"), artifact);
}

// ------------------------------------------------------------- elliptic tasks

ScalarField seeded_trig_field(PeriodicGrid g, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> mode(-10, 10);
    std::uniform_real_distribution<double> amp(-0.15, 0.15);
    struct Term {
        int kx, ky;
        double ac, as;
    };
    std::vector<Term> terms;
    for (int m = 0; m < 4; ++m) {
        int kx = mode(rng), ky = mode(rng);
        if (kx == 0 && ky == 0) kx = 1;
        terms.push_back({kx, ky, amp(rng), amp(rng)});
    }
    return tabulate(g, [&](double x, double y) {
        double v = 1.0;
        for (const Term& t : terms) {
            double u = kTwoPi * (t.kx * x + t.ky * y);
            v += t.ac * std::cos(u) + t.as * std::sin(u);
        }
        return v;
    });
}

std::vector<std::pair<ScalarField, ScalarField>> seeded_trig_pairs(PeriodicGrid g, int count,
                                                                   unsigned long long seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::pair<ScalarField, ScalarField>> out;
    out.reserve(size_t(count));
    for (int i = 0; i < count; ++i) {
        ScalarField f = seeded_trig_field(g, rng);
        ScalarField h = seeded_trig_field(g, rng);
        out.emplace_back(std::move(f), std::move(h));
    }
    return out;
}

void run_elliptic_solve(const Json& payload, const RunOptions& opt, const std::string& name,
                        const std::string& paper_ref, bool semilinear, Checks& checks,
                        Json& details, bool dry) {
    require_keys(payload, {"task", "n", semilinear ? "chi" : "g0", "f"}, {"tol"}, "elliptic");
    PeriodicGrid grid;
    try {
        grid = make_grid(int(get_integer(payload, "n", 0, "elliptic")));
    } catch (const GridError& e) {
        schema_fail("elliptic.n", e.what());
    }
    DensitySpec lhs = density_from_json(payload[semilinear ? "chi" : "g0"]);
    DensitySpec rhs = density_from_json(payload["f"]);
    double tol = get_number(payload, "tol", 1e-10, "elliptic");
    if (dry) return;

    ScalarField a = build_density(grid, lhs);
    ScalarField b = build_density(grid, rhs);
    EllipticSolution sol = semilinear ? solve_semilinear_ma(a, b, tol) : solve_linear_ma(a, b, tol);
    checks.add(sol.residual <= tol, "residual " + format_full(sol.residual) + " within tolerance");
    details["solution"] = {{"c", sol.c},
                           {"residual", sol.residual},
                           {"iterations", sol.iterations},
                           {"min_density", sol.min_density},
                           {"positive", sol.positive}};
    write_field(artifact_path(opt, name, "_phi.fld"), sol.phi);
    Json artifact = details["solution"];
    artifact["paper_ref"] = paper_ref;
    write_json_file(artifact_path(opt, name, "_report.json"), artifact);
}

void run_elliptic_stability(const Json& payload, const RunOptions& opt, const std::string& name,
                            const std::string& paper_ref, unsigned long long seed, Checks& checks,
                            Json& details, bool dry) {
    require_keys(payload, {"task", "n", "n_check", "pairs", "epsilon"},
                 {"deltas", "max_rel_spread"}, "elliptic");
    int n = int(get_integer(payload, "n", 0, "elliptic"));
    int n_check = int(get_integer(payload, "n_check", 0, "elliptic"));
    int pair_count = int(get_integer(payload, "pairs", 0, "elliptic"));
    double epsilon = get_number(payload, "epsilon", 0.05, "elliptic");
    double spread = get_number(payload, "max_rel_spread", 0.2, "elliptic");
    std::vector<double> deltas =
        payload.contains("deltas") ? number_array(payload["deltas"], "elliptic.deltas")
                                   : std::vector<double>{};
    if (pair_count < 1) schema_fail("elliptic.pairs", "need at least one pair");
    PeriodicGrid grid, grid_check;
    try {
        grid = make_grid(n);
        grid_check = make_grid(n_check);
    } catch (const GridError& e) {
        schema_fail("elliptic", e.what());
    }
    if (dry) return;

    StabilityReport fit = stability_experiment(constant_field(grid, 1.0),
                                               seeded_trig_pairs(grid, pair_count, seed), epsilon);
    StabilityReport fit_check =
        stability_experiment(constant_field(grid_check, 1.0),
                             seeded_trig_pairs(grid_check, pair_count, seed), epsilon);
    bool finite = std::isfinite(fit.fitted_c) && fit.fitted_c > 0;
    checks.add(finite, "fitted constant " + format_full(fit.fitted_c) + " finite and positive");
    double rel = std::abs(fit_check.fitted_c / fit.fitted_c - 1.0);
    checks.add(rel <= spread, "refined fit " + format_full(fit_check.fitted_c) + " within " +
                                  format_full(spread * 100) + "% (moved " +
                                  format_full(rel * 100) + "%)");

    Json delta_rows = Json::array();
    if (!deltas.empty()) {
        ScalarField base =
            tabulate(grid, [](double x, double) { return 1.0 + 0.2 * std::cos(kTwoPi * x); });
        ScalarField bump = tabulate(grid, [](double x, double y) {
            double s = std::sin(M_PI * (x - 0.3)), t = std::sin(M_PI * (y - 0.7));
            return std::exp(-(s * s + t * t) / 0.02);
        });
        std::vector<std::pair<ScalarField, ScalarField>> pairs;
        for (double d : deltas) {
            ScalarField pert = base;
            add_scaled(pert, d, bump);
            pairs.emplace_back(base, pert);
        }
        StabilityReport sweep = stability_experiment(constant_field(grid, 1.0), pairs, epsilon);
        bool direction = true;
        for (size_t i = 0; i < sweep.pairs.size(); ++i) {
            if (sweep.pairs[i].skipped || !std::isfinite(sweep.pairs[i].ratio)) direction = false;
            // Deltas are listed in decreasing order; the normalized ratio must
            // shrink with the bump, which is the inequality's direction.
            if (i > 0 && sweep.pairs[i].ratio > sweep.pairs[i - 1].ratio * 1.05) direction = false;
            delta_rows.push_back({{"delta", deltas[i]},
                                  {"l1", sweep.pairs[i].l1},
                                  {"linf", sweep.pairs[i].linf},
                                  {"ratio", sweep.pairs[i].ratio}});
        }
        checks.add(direction, "localized-bump sweep respects the inequality direction down to " +
                                  format_full(deltas.back()));
    }

    write_text_file(artifact_path(opt, name, "_pairs.csv"), stability_csv(fit));
    details["stability"] = {{"exponent", fit.exponent},
                            {"fitted_c", fit.fitted_c},
                            {"fitted_c_refined", fit_check.fitted_c},
                            {"delta_sweep", delta_rows}};
    Json artifact = details["stability"];
    artifact["paper_ref"] = paper_ref;
    write_json_file(artifact_path(opt, name, "_report.json"), artifact);
}

// ----------------------------------------------------------------- flow tasks

void run_flow_plain(const Json& payload, const RunOptions& opt, const std::string& name,
                    const std::string& paper_ref, Checks& checks, Json& details, bool dry) {
    require_keys(payload, {"task", "config"}, {"phi0", "band_t_min", "write_field"}, "flow");
    FlowConfig config = flow_config_from_json(payload["config"]);
    Json phi0_json = payload.value("phi0", Json());
    if (dry) {
        if (!phi0_json.is_null()) (void)phi0_from_json(config, phi0_json);
        return;
    }
    ScalarField phi0 = phi0_from_json(config, phi0_json);
    FlowState st = run_flow(config, phi0);
    check_class_linearity(checks, details, "run", st.monitors, config.mode, chi_integral(config));
    if (payload.contains("band_t_min")) {
        VolumeBandReport band =
            volume_band_check(st.monitors, get_number(payload, "band_t_min", 0.0, "flow"));
        details["volume_band"] = {{"c", band.c},
                                  {"c_small_time", band.c_small_time},
                                  {"samples_used", band.samples_used}};
        checks.add(std::isfinite(band.c), "volume band constant " + format_full(band.c));
    }
    write_text_file(artifact_path(opt, name, "_monitors.csv"), flow_monitor_csv(st.monitors));
    if (get_bool(payload, "write_field", true, "flow"))
        write_field(artifact_path(opt, name, "_phi.fld"), st.phi);
    details["final"] = {{"t", st.t},
                        {"phi_inf", sup_abs(st.phi)},
                        {"steps", st.monitors.samples.size() - 1}};
    Json artifact = details;
    artifact["paper_ref"] = paper_ref;
    write_json_file(artifact_path(opt, name, "_report.json"), artifact);
}

void run_flow_smoothing(const Json& payload, const RunOptions& opt, const std::string& name,
                        const std::string& paper_ref, int jobs, Checks& checks, Json& details,
                        bool dry) {
    require_keys(payload,
                 {"task", "config", "grids", "rough_target", "band_t_min"},
                 {"rough_tol", "smooth_spread_max", "rough_growth_min", "band_spread_max"},
                 "flow");
    Json base_config = payload["config"];
    DensitySpec target = density_from_json(payload["rough_target"]);
    double rough_tol = get_number(payload, "rough_tol", 1e-8, "flow");
    double band_t_min = get_number(payload, "band_t_min", 0.05, "flow");
    double spread_max = get_number(payload, "smooth_spread_max", 0.15, "flow");
    double growth_min = get_number(payload, "rough_growth_min", 3.0, "flow");
    double band_spread = get_number(payload, "band_spread_max", 0.25, "flow");
    if (!payload["grids"].is_array() || payload["grids"].size() < 2)
        schema_fail("flow.grids", "expected at least two grid sizes");
    std::vector<int> grids;
    for (const Json& g : payload["grids"]) grids.push_back(int(g.get<long long>()));
    (void)flow_config_from_json(base_config);
    if (dry) return;

    struct Row {
        double rough0, smooth_t, band_c, linearity, m0;
    };
    std::vector<Row> rows(grids.size());
    parallel_for(int(grids.size()), jobs, [&](int i) {
        Json cj = base_config;
        cj["n"] = grids[size_t(i)];
        FlowConfig c = flow_config_from_json(cj);
        ScalarField phi0 = rough_initial_potential(c.grid, c.g0, target, rough_tol);
        double before = 0.5 * sup_abs(spectral_laplacian(phi0));
        FlowState st = run_flow(c, phi0);
        double after = 0.5 * sup_abs(spectral_laplacian(st.phi));
        VolumeBandReport band = volume_band_check(st.monitors, band_t_min);
        rows[size_t(i)] = {before, after, band.c,
                           class_linearity_deviation(st.monitors, c.mode, chi_integral(c)),
                           st.monitors.samples.front().class_mass};
    });

    std::vector<std::vector<double>> csv;
    for (size_t i = 0; i < grids.size(); ++i)
        csv.push_back({double(grids[i]), rows[i].rough0, rows[i].smooth_t, rows[i].band_c,
                       rows[i].linearity});
    write_text_file(artifact_path(opt, name, "_sweep.csv"),
                    csv_table({"n", "rough_half_lap_sup_t0", "half_lap_sup_t_end",
                               "volume_band_c", "class_linearity_deviation"},
                              csv));

    double worst_spread = 0.0;
    for (size_t i = 1; i < grids.size(); ++i)
        worst_spread =
            std::max(worst_spread, std::abs(rows[i].smooth_t / rows[i - 1].smooth_t - 1.0));
    checks.add(worst_spread <= spread_max,
               "smoothed sup |lap(phi)/2| varies " + format_full(worst_spread * 100) +
                   "% across refinements (allowed " + format_full(spread_max * 100) + "%)");
    double growth = rows.back().rough0 / rows.front().rough0;
    checks.add(growth >= growth_min, "initial roughness grows x" + format_full(growth) +
                                         " from n=" + std::to_string(grids.front()) +
                                         " to n=" + std::to_string(grids.back()));
    double band_rel = std::abs(rows.back().band_c / rows[rows.size() - 2].band_c - 1.0);
    checks.add(band_rel <= band_spread, "volume band constant moved " +
                                            format_full(band_rel * 100) +
                                            "% across the last refinement");
    bool lin_ok = true;
    double worst_lin = 0.0;
    for (const Row& r : rows) {
        worst_lin = std::max(worst_lin, r.linearity);
        lin_ok = lin_ok && r.linearity <= 1e-10 * std::abs(r.m0);
    }
    checks.add(lin_ok, "class mass follows the exact law on every grid (worst deviation " +
                           format_full(worst_lin) + ")");
    details["sweep"] = Json::array();
    for (size_t i = 0; i < grids.size(); ++i)
        details["sweep"].push_back({{"n", grids[i]},
                                    {"rough0", rows[i].rough0},
                                    {"smooth_t", rows[i].smooth_t},
                                    {"band_c", rows[i].band_c},
                                    {"class_linearity_deviation", rows[i].linearity}});
    Json artifact = details["sweep"];
    Json wrapper = {{"paper_ref", paper_ref}, {"sweep", artifact}};
    write_json_file(artifact_path(opt, name, "_report.json"), wrapper);
}

void run_flow_comparison(const Json& payload, const RunOptions& opt, const std::string& name,
                         const std::string& paper_ref, unsigned long long seed, int jobs,
                         Checks& checks, Json& details, bool dry) {
    require_keys(payload, {"task", "config", "pairs", "t_end"}, {"rerun_pair"}, "flow");
    FlowConfig config = flow_config_from_json(payload["config"]);
    int pair_count = int(get_integer(payload, "pairs", 0, "flow"));
    double t_end = get_number(payload, "t_end", 0.0, "flow");
    if (pair_count < 1) schema_fail("flow.pairs", "need at least one pair");
    if (dry) return;

    // Seeded ordered pairs: a small trig start and the same start plus a
    // nonnegative bump, drawn once up front so the sweep order cannot matter.
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> mode(-3, 3);
    std::uniform_int_distribution<int> bump_mode(0, 2);
    std::uniform_real_distribution<double> amp(-0.002, 0.002);
    std::uniform_real_distribution<double> bump_amp(0.002, 0.01);
    std::uniform_real_distribution<double> phase(0.0, 1.0);
    std::vector<std::pair<ScalarField, ScalarField>> pairs;
    for (int i = 0; i < pair_count; ++i) {
        struct Term {
            int kx, ky;
            double ac, as;
        };
        std::vector<Term> terms;
        for (int m = 0; m < 3; ++m) {
            int kx = mode(rng), ky = mode(rng);
            if (kx == 0 && ky == 0) kx = 1;
            // Amplitudes shrink like 1/|k|^2 so the start's curvature stays
            // small against the background density whatever modes are drawn.
            double scale = double(kx * kx + ky * ky);
            terms.push_back({kx, ky, amp(rng) / scale, amp(rng) / scale});
        }
        int bx = bump_mode(rng), by = bump_mode(rng);
        double bscale = std::max(1.0, double(bx * bx + by * by));
        double ba = bump_amp(rng) / bscale, bp = phase(rng);
        ScalarField lo = tabulate(config.grid, [&](double x, double y) {
            double v = 0.0;
            for (const Term& t : terms)
                v += t.ac * std::cos(kTwoPi * (t.kx * x + t.ky * y)) +
                     t.as * std::sin(kTwoPi * (t.kx * x + t.ky * y));
            return v;
        });
        ScalarField hi = lo;
        ScalarField bump = tabulate(config.grid, [&](double x, double y) {
            return ba * (1.0 + std::cos(kTwoPi * (bx * x + by * y + bp)));
        });
        add_scaled(hi, 1.0, bump);
        pairs.emplace_back(std::move(lo), std::move(hi));
    }

    struct Row {
        bool pass;
        double violation, gap_increase, linearity;
    };
    std::vector<Row> rows(pairs.size());
    double int_chi = chi_integral(config);
    parallel_for(pair_count, jobs, [&](int i) {
        ComparisonReport rep =
            comparison_check(config, pairs[size_t(i)].first, pairs[size_t(i)].second, t_end);
        double lin = std::max(
            class_linearity_deviation(rep.low.monitors, config.mode, int_chi),
            class_linearity_deviation(rep.high.monitors, config.mode, int_chi));
        rows[size_t(i)] = {rep.pass, rep.max_order_violation, rep.max_gap_increase, lin};
    });

    bool ordered = true;
    double worst_violation = 0.0, worst_lin = 0.0;
    std::vector<std::vector<double>> csv;
    for (int i = 0; i < pair_count; ++i) {
        ordered = ordered && rows[size_t(i)].pass;
        worst_violation = std::max(worst_violation, rows[size_t(i)].violation);
        worst_lin = std::max(worst_lin, rows[size_t(i)].linearity);
        csv.push_back({double(i), rows[size_t(i)].violation, rows[size_t(i)].gap_increase,
                       rows[size_t(i)].pass ? 1.0 : 0.0});
    }
    checks.add(ordered, "all " + std::to_string(pair_count) +
                            " ordered pairs stay ordered (worst violation " +
                            format_full(worst_violation) + " <= " +
                            format_full(10.0 * config.step_tol) + ")");
    double m0 = field_integral(build_density(config.grid, config.g0));
    checks.add(worst_lin <= 1e-10 * std::abs(m0),
               "class mass follows the exact law on every run (worst deviation " +
                   format_full(worst_lin) + ")");

    int rerun = int(get_integer(payload, "rerun_pair", 0, "flow"));
    if (rerun >= 0 && rerun < pair_count) {
        ComparisonReport a =
            comparison_check(config, pairs[size_t(rerun)].first, pairs[size_t(rerun)].second, t_end);
        ComparisonReport b =
            comparison_check(config, pairs[size_t(rerun)].first, pairs[size_t(rerun)].second, t_end);
        bool identical = flow_monitor_csv(a.low.monitors) == flow_monitor_csv(b.low.monitors) &&
                         flow_monitor_csv(a.high.monitors) == flow_monitor_csv(b.high.monitors) &&
                         a.low.phi.values == b.low.phi.values &&
                         a.high.phi.values == b.high.phi.values;
        checks.add(identical, "identical configs reproduce byte-identical monitor logs");
        write_text_file(artifact_path(opt, name, "_pair0_low_monitors.csv"),
                        flow_monitor_csv(a.low.monitors));
    }

    write_text_file(artifact_path(opt, name, "_pairs.csv"),
                    csv_table({"pair", "max_order_violation", "max_gap_increase", "ordered"}, csv));
    details["comparison"] = {{"pairs", pair_count},
                             {"worst_violation", worst_violation},
                             {"bound", 10.0 * config.step_tol}};
    Json artifact = details["comparison"];
    artifact["paper_ref"] = paper_ref;
    write_json_file(artifact_path(opt, name, "_report.json"), artifact);
}

void run_flow_perturbation(const Json& payload, const RunOptions& opt, const std::string& name,
                           const std::string& paper_ref, Checks& checks, Json& details, bool dry) {
    require_keys(payload,
                 {"task", "config", "params", "sample_times"},
                 {"convergence_factor", "convergence_reference"},
                 "flow");
    FlowConfig config = flow_config_from_json(payload["config"]);
    if (!payload["params"].is_array() || payload["params"].empty())
        schema_fail("flow.params", "expected an array of [s, w, r] triples");
    std::vector<PerturbationParams> grid;
    for (const Json& p : payload["params"]) {
        std::vector<double> triple = number_array(p, "flow.params");
        if (triple.size() != 3) schema_fail("flow.params", "each entry is [s, w, r]");
        grid.push_back({triple[0], triple[1], triple[2], 0.0});
    }
    std::vector<double> sample_times = number_array(payload["sample_times"], "flow.sample_times");
    double factor = get_number(payload, "convergence_factor", 2.0, "flow");
    if (dry) return;

    PerturbationReport rep = perturbation_monotonicity_check(config, grid, sample_times);
    checks.add(rep.monotone, "family is monotone: down in r, up in w, up in s (worst masked "
                             "violations r=" +
                                 format_full(rep.masked_r_violation) +
                                 " w=" + format_full(rep.masked_w_violation) +
                                 " s=" + format_full(rep.masked_s_violation) + ")");

    // Convergence: every member inside the reference box must sit within
    // factor x the reference member's distance from the unperturbed run.
    std::vector<double> ref = payload.contains("convergence_reference")
                                  ? number_array(payload["convergence_reference"], "flow")
                                  : std::vector<double>{0.01, 0.0, 0.0};
    if (ref.size() != 3) schema_fail("flow.convergence_reference", "expected [s, w, r]");
    int ref_index = -1;
    for (size_t i = 0; i < grid.size(); ++i)
        if (grid[i].s == ref[0] && grid[i].w == ref[1] && grid[i].r == ref[2]) ref_index = int(i);
    if (ref_index >= 0 && !rep.runs[size_t(ref_index)].masked_gap_to_reference.empty()) {
        double bound_scale = *std::max_element(
            rep.runs[size_t(ref_index)].masked_gap_to_reference.begin(),
            rep.runs[size_t(ref_index)].masked_gap_to_reference.end());
        bool converged = true;
        double worst = 0.0;
        for (size_t i = 0; i < grid.size(); ++i) {
            const PerturbationParams& p = grid[i];
            if (std::max({p.s, p.w, p.r}) > ref[0] + ref[1] + ref[2]) continue;
            for (double gap : rep.runs[i].masked_gap_to_reference) {
                worst = std::max(worst, gap);
                if (gap > factor * bound_scale) converged = false;
            }
        }
        checks.add(converged, "small members stay within " + format_full(factor) +
                                  "x the reference gap " + format_full(bound_scale) +
                                  " (worst " + format_full(worst) + ")");
    } else {
        checks.add(false, "convergence reference member missing from params");
    }

    std::vector<std::string> header = {"s", "w", "r"};
    for (double t : sample_times) header.push_back("masked_gap_t" + format_full(t));
    std::vector<std::vector<double>> csv;
    for (size_t i = 0; i < grid.size(); ++i) {
        std::vector<double> row = {grid[i].s, grid[i].w, grid[i].r};
        for (double gap : rep.runs[i].masked_gap_to_reference) row.push_back(gap);
        csv.push_back(std::move(row));
    }
    write_text_file(artifact_path(opt, name, "_gaps.csv"), csv_table(header, csv));

    // The reference member re-run standalone so this scenario also logs a
    // monitored trajectory for the exact class-mass law.
    FlowState st = run_flow(config, constant_field(config.grid, 0.0));
    check_class_linearity(checks, details, "reference", st.monitors, config.mode,
                          chi_integral(config));
    write_text_file(artifact_path(opt, name, "_monitors.csv"), flow_monitor_csv(st.monitors));

    details["perturbation"] = {{"monotone", rep.monotone},
                               {"masked_r_violation", rep.masked_r_violation},
                               {"masked_w_violation", rep.masked_w_violation},
                               {"masked_s_violation", rep.masked_s_violation}};
    Json artifact = details["perturbation"];
    artifact["paper_ref"] = paper_ref;
    write_json_file(artifact_path(opt, name, "_report.json"), artifact);
}

void run_flow_normalized(const Json& payload, const RunOptions& opt, const std::string& name,
                         const std::string& paper_ref, Checks& checks, Json& details, bool dry) {
    require_keys(payload,
                 {"task", "config", "tol"},
                 {"l1_final_max", "rough_target", "rough_tol"},
                 "flow");
    FlowConfig config = flow_config_from_json(payload["config"]);
    double tol = get_number(payload, "tol", 1e-5, "flow");
    double l1_max = get_number(payload, "l1_final_max", 1e-6, "flow");
    if (dry) return;

    NormalizedConvergenceReport smooth =
        normalized_convergence_check(config, constant_field(config.grid, 0.0), tol);
    checks.add(smooth.final_gap < tol, "smooth start reaches the fixed point (gap " +
                                           format_full(smooth.final_gap) + ")");
    checks.add(smooth.envelope_ok, "one-sided rate envelope C t e^{-t} holds (C = " +
                                       format_full(smooth.fitted_c) + ")");
    checks.add(smooth.l1_monotone && smooth.l1_final < l1_max,
               "rate L1 norm decays monotonically to " + format_full(smooth.l1_final));

    bool same_limit = true;
    if (payload.contains("rough_target")) {
        ScalarField rough0 =
            rough_initial_potential(config.grid, config.g0,
                                    density_from_json(payload["rough_target"]),
                                    get_number(payload, "rough_tol", 1e-8, "flow"));
        NormalizedConvergenceReport rough = normalized_convergence_check(config, rough0, tol);
        checks.add(rough.final_gap < tol, "rough start reaches the fixed point (gap " +
                                              format_full(rough.final_gap) + ")");
        double gap = linf_distance(smooth.state.phi, rough.state.phi);
        same_limit = gap < tol;
        checks.add(same_limit,
                   "rough and smooth starts agree at the end (distance " + format_full(gap) + ")");
        details["start_independence_gap"] = gap;
    }

    check_class_linearity(checks, details, "smooth", smooth.state.monitors, config.mode,
                          chi_integral(config));
    write_text_file(artifact_path(opt, name, "_monitors.csv"),
                    flow_monitor_csv(smooth.state.monitors));
    write_field(artifact_path(opt, name, "_phi_limit.fld"), smooth.phi_limit);
    details["normalized"] = {{"final_gap", smooth.final_gap},
                             {"fitted_c", smooth.fitted_c},
                             {"l1_final", smooth.l1_final}};
    Json artifact = details["normalized"];
    artifact["paper_ref"] = paper_ref;
    write_json_file(artifact_path(opt, name, "_report.json"), artifact);
}

void run_flow_curvature(const Json& payload, const RunOptions& opt, const std::string& name,
                        const std::string& paper_ref, int jobs, Checks& checks, Json& details,
                        bool dry) {
    require_keys(payload,
                 {"task", "config", "grids", "rough_target"},
                 {"rough_tol", "max_rel_spread"},
                 "flow");
    Json base_config = payload["config"];
    DensitySpec target = density_from_json(payload["rough_target"]);
    double rough_tol = get_number(payload, "rough_tol", 1e-8, "flow");
    double spread = get_number(payload, "max_rel_spread", 0.25, "flow");
    if (!payload["grids"].is_array() || payload["grids"].size() < 2)
        schema_fail("flow.grids", "expected at least two grid sizes");
    std::vector<int> grids;
    for (const Json& g : payload["grids"]) grids.push_back(int(g.get<long long>()));
    (void)flow_config_from_json(base_config);
    if (dry) return;

    std::vector<double> sups(grids.size()), linearity(grids.size()), masses(grids.size());
    parallel_for(int(grids.size()), jobs, [&](int i) {
        Json cj = base_config;
        cj["n"] = grids[size_t(i)];
        FlowConfig c = flow_config_from_json(cj);
        ScalarField phi0 = rough_initial_potential(c.grid, c.g0, target, rough_tol);
        FlowState st = run_flow(c, phi0);
        sups[size_t(i)] = scalar_curvature_monitor(st, c);
        linearity[size_t(i)] = class_linearity_deviation(st.monitors, c.mode, chi_integral(c));
        masses[size_t(i)] = st.monitors.samples.front().class_mass;
    });

    bool finite = true;
    for (double s : sups) finite = finite && std::isfinite(s);
    checks.add(finite, "restricted curvature sup finite on every grid");
    double rel = std::abs(sups.back() / sups.front() - 1.0);
    checks.add(rel <= spread, "curvature sup moved " + format_full(rel * 100) +
                                  "% under refinement (allowed " + format_full(spread * 100) +
                                  "%)");
    bool lin_ok = true;
    double worst_lin = 0.0;
    for (size_t i = 0; i < grids.size(); ++i) {
        worst_lin = std::max(worst_lin, linearity[i]);
        lin_ok = lin_ok && linearity[i] <= 1e-10 * std::abs(masses[i]);
    }
    checks.add(lin_ok, "class mass follows the exact law on every grid (worst " +
                           format_full(worst_lin) + ")");

    std::vector<std::vector<double>> csv;
    for (size_t i = 0; i < grids.size(); ++i)
        csv.push_back({double(grids[i]), sups[i], linearity[i]});
    write_text_file(artifact_path(opt, name, "_curvature.csv"),
                    csv_table({"n", "restricted_curvature_sup", "class_linearity_deviation"}, csv));
    details["curvature"] = {{"sups", sups}, {"rel_spread", rel}};
    Json artifact = details["curvature"];
    artifact["paper_ref"] = paper_ref;
    write_json_file(artifact_path(opt, name, "_report.json"), artifact);
}

}  // namespace

// --------------------------------------------------------------- sphere tasks

SphereConfig sphere_config_from_json(const Json& j) {
    require_keys(j,
                 {"m"},
                 {"v0", "mode", "T0", "t_end", "newton_tol", "dt_init", "dt_min", "dt_max"},
                 "sphere.config");
    SphereConfig c;
    c.m = int(get_integer(j, "m", 0, "sphere.config"));
    if (j.contains("v0")) c.v0_cos = number_array(j["v0"], "sphere.config.v0");
    std::string mode = get_string(j, "mode", "unnormalized", "sphere.config");
    if (mode == "unnormalized")
        c.mode = SphereMode::Unnormalized;
    else if (mode == "normalized_fano")
        c.mode = SphereMode::NormalizedFano;
    else
        schema_fail("sphere.config.mode", "expected \"unnormalized\" or \"normalized_fano\"");
    c.T0 = get_number(j, "T0", 0.0, "sphere.config");
    c.t_end = get_number(j, "t_end", c.t_end, "sphere.config");
    c.newton_tol = get_number(j, "newton_tol", c.newton_tol, "sphere.config");
    c.dt_init = get_number(j, "dt_init", c.dt_init, "sphere.config");
    c.dt_min = get_number(j, "dt_min", c.dt_min, "sphere.config");
    c.dt_max = get_number(j, "dt_max", c.dt_max, "sphere.config");
    return c;
}

namespace {

void run_sphere_plain(const Json& payload, const RunOptions& opt, const std::string& name,
                      const std::string& paper_ref, Checks& checks, Json& details, bool dry) {
    require_keys(payload,
                 {"task", "config"},
                 {"gauss_bonnet_max", "area_conserved_rel", "round_tol"},
                 "sphere");
    SphereConfig config = sphere_config_from_json(payload["config"]);
    double gb_max = get_number(payload, "gauss_bonnet_max", 0.005, "sphere");
    if (dry) return;

    SphereRunResult run = run_sphere_flow(config);
    double worst_gb = 0.0;
    for (const SphereMonitorSample& s : run.monitors.samples)
        worst_gb = std::max(worst_gb, s.gauss_bonnet_residual);
    checks.add(worst_gb <= gb_max, "curvature integral residual stays below " +
                                       format_full(gb_max) + " (worst " + format_full(worst_gb) +
                                       ")");
    if (payload.contains("area_conserved_rel")) {
        double rel = get_number(payload, "area_conserved_rel", 0.0, "sphere");
        double a0 = run.monitors.samples.front().area, drift = 0.0;
        for (const SphereMonitorSample& s : run.monitors.samples)
            drift = std::max(drift, std::abs(s.area - a0));
        checks.add(drift <= rel * a0, "area conserved to " + format_full(drift / a0 * 100) +
                                          "% (allowed " + format_full(rel * 100) + "%)");
        details["area_drift_rel"] = drift / a0;
    }
    if (payload.contains("round_tol")) {
        double tol = get_number(payload, "round_tol", 0.0, "sphere");
        LatitudeGrid g = make_latitude_grid(config.m);
        double vbar = sphere_area(g, run.state.v) /
                      sphere_area(g, std::vector<double>(size_t(config.m), 1.0));
        double dev = 0.0;
        for (double v : run.state.v) dev = std::max(dev, std::abs(v - vbar));
        checks.add(dev < tol, "profile is round to " + format_full(dev) + " (allowed " +
                                  format_full(tol) + ")");
        details["round_deviation"] = dev;
    }
    write_text_file(artifact_path(opt, name, "_monitors.csv"), sphere_monitor_csv(run.monitors));
    details["final"] = {{"t", run.state.t},
                        {"area", run.monitors.samples.back().area},
                        {"worst_gauss_bonnet", worst_gb}};
    Json artifact = details;
    artifact["paper_ref"] = paper_ref;
    write_json_file(artifact_path(opt, name, "_report.json"), artifact);
}

void run_sphere_extinction(const Json& payload, const RunOptions& opt, const std::string& name,
                           const std::string& paper_ref, int jobs, Checks& checks, Json& details,
                           bool dry) {
    require_keys(payload,
                 {"task", "config", "profiles", "vanish_tol"},
                 {"extinction_rel_tol", "area_rel_tol", "area_until_frac", "gauss_bonnet_max"},
                 "sphere");
    Json base_config = payload["config"];
    (void)sphere_config_from_json(base_config);
    if (!payload["profiles"].is_array() || payload["profiles"].empty())
        schema_fail("sphere.profiles", "expected an array of cosine-coefficient arrays");
    std::vector<std::vector<double>> profiles;
    for (const Json& p : payload["profiles"])
        profiles.push_back(number_array(p, "sphere.profiles"));
    double vanish = get_number(payload, "vanish_tol", 0.05, "sphere");
    double ext_tol = get_number(payload, "extinction_rel_tol", 0.02, "sphere");
    double area_tol = get_number(payload, "area_rel_tol", 0.01, "sphere");
    double until = get_number(payload, "area_until_frac", 0.9, "sphere");
    double gb_max = get_number(payload, "gauss_bonnet_max", 0.005, "sphere");
    if (dry) return;

    std::vector<ExtinctionReport> reports(profiles.size());
    parallel_for(int(profiles.size()), jobs, [&](int i) {
        Json cj = base_config;
        cj["v0"] = profiles[size_t(i)];
        SphereConfig c = sphere_config_from_json(cj);
        reports[size_t(i)] = extinction_experiment(c, vanish);
    });

    Json rows = Json::array();
    for (size_t i = 0; i < profiles.size(); ++i) {
        const ExtinctionReport& rep = reports[i];
        checks.add(rep.rel_error <= ext_tol,
                   "profile " + std::to_string(i) + ": extinction " +
                       format_full(rep.t_measured) + " vs " +
                       format_full(rep.t0_cohomological) + " (rel error " +
                       format_full(rep.rel_error) + ")");
        double worst_area = 0.0, worst_gb = 0.0;
        double a0 = rep.a0;
        for (const SphereMonitorSample& s : rep.monitors.samples) {
            // Area law windowed to the early fraction of the lifetime; the
            // curvature integral residual must hold on the whole run.
            if (s.t <= until * rep.t0_cohomological)
                worst_area = std::max(worst_area, std::abs(s.area - (a0 - 4.0 * M_PI * s.t)));
            worst_gb = std::max(worst_gb, s.gauss_bonnet_residual);
        }
        checks.add(worst_area <= area_tol * a0,
                   "profile " + std::to_string(i) + ": area law linear to " +
                       format_full(worst_area / a0 * 100) + "% of the initial area");
        checks.add(worst_gb <= gb_max, "profile " + std::to_string(i) +
                                           ": curvature integral residual below " +
                                           format_full(gb_max) + " throughout (worst " +
                                           format_full(worst_gb) + ")");
        write_text_file(artifact_path(opt, name, "_profile" + std::to_string(i) + "_monitors.csv"),
                        sphere_monitor_csv(rep.monitors));
        rows.push_back({{"a0", rep.a0},
                        {"t0", rep.t0_cohomological},
                        {"t_measured", rep.t_measured},
                        {"rel_error", rep.rel_error}});
    }
    details["extinction"] = rows;
    Json artifact = {{"paper_ref", paper_ref}, {"profiles", rows}};
    write_json_file(artifact_path(opt, name, "_report.json"), artifact);
}

// ---------------------------------------------------------------- suite layer

const std::vector<SuiteInfo>& registry() {
    static const std::vector<SuiteInfo> suites = {
        {"thm48_rationality", "Thm. 4.8",
         "exact nef thresholds stay rational on the blow-up corpus",
         {"corpus_rationality.json"}},
        {"thm55_mmp_timeline", "Thm. 5.5",
         "golden contraction traces and the exact timeline law",
         {"f1_blowdown.json", "p2_point.json", "f1_morifiber.json", "corpus_timeline.json"}},
        {"thm28_stability", "Thm. 2.8",
         "L1-to-Linf stability fits are finite and grid-stable",
         {"stability_pairs.json"}},
        {"sec3_comparison_uniqueness", "Sec. 3",
         "ordered starts stay ordered; identical runs are byte-identical",
         {"comparison_pairs.json"}},
        {"sec32_perturbation_family", "Sec. 3.2",
         "perturbation family is monotone and collapses onto the base run",
         {"perturbation_sweep.json"}},
        {"sec56_normalized_convergence", "Sec. 5.6",
         "normalized flow lands on the semilinear fixed point with the decay envelope",
         {"normalized_convergence.json"}},
        {"sec61_sphere_extinction", "Sec. 6.1",
         "sphere flow dies at the class-predicted time; normalized flow rounds out",
         {"sphere_extinction.json", "sphere_fano.json"}},
        {"thmA1_volume_band", "Thm. A.1",
         "rough data smooths uniformly across refinements with stable band constants",
         {"smoothing_sweep.json", "cy_steady.json"}},
        {"thmA2_scalar_curvature", "Thm. A.2",
         "restricted curvature monitor is finite and refinement-stable",
         {"curvature_monitor.json"}},
    };
    return suites;
}

ScenarioReport execute_impl(const Json& doc, const RunOptions& opt, bool dry, int depth);

void run_suite(const Json& payload, const RunOptions& opt, Checks& checks, Json& details,
               bool dry, int depth) {
    require_keys(payload, {"name"}, {}, "suite");
    std::string suite_name = payload["name"].get<std::string>();
    const SuiteInfo* info = nullptr;
    for (const SuiteInfo& s : registry())
        if (s.name == suite_name) info = &s;
    if (!info) schema_fail("suite.name", "unknown suite \"" + suite_name + "\"");
    if (dry) return;
    if (depth > 0) schema_fail("suite", "suites cannot nest");
    if (opt.scenario_dir.empty())
        schema_fail("suite", "no scenario directory configured (set RICCI_MMP_SCENARIOS or run "
                             "the suite from the directory holding the bundled scenarios)");

    for (const std::string& file : info->scenario_files) {
        std::string path = (std::filesystem::path(opt.scenario_dir) / file).string();
        ScenarioReport rep = execute_impl(load_json_file(path), opt, false, depth + 1);
        checks.add(rep.checks_passed, file + " (" + rep.name + ")");
        for (const std::string& line : rep.notes) checks.info("  " + line);
        details["members"].push_back(
            {{"file", file}, {"name", rep.name}, {"checks_passed", rep.checks_passed}});
    }
}

ScenarioReport execute_impl(const Json& doc, const RunOptions& opt, bool dry, int depth) {
    require_keys(doc,
                 {"schema", "kind", "name", "paper_ref"},
                 {"seed", "out_dir", "mmp", "flow", "elliptic", "sphere", "suite"},
                 "scenario");
    if (!doc["schema"].is_number_integer() || doc["schema"].get<long long>() != 1)
        schema_fail("scenario.schema", "unsupported schema version (expected 1)");
    ScenarioReport rep;
    rep.kind = get_string(doc, "kind", "", "scenario");
    rep.name = get_string(doc, "name", "", "scenario");
    rep.paper_ref = get_string(doc, "paper_ref", "", "scenario");
    if (rep.name.empty()) schema_fail("scenario.name", "must be nonempty");
    for (char ch : rep.name)
        if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_' && ch != '-')
            schema_fail("scenario.name", "use letters, digits, '_' or '-' only");
    unsigned long long seed =
        (unsigned long long)(get_integer(doc, "seed", 0, "scenario"));
    if (!doc.contains(rep.kind))
        schema_fail("scenario", "kind \"" + rep.kind + "\" needs a \"" + rep.kind + "\" payload");
    for (const char* k : {"mmp", "flow", "elliptic", "sphere", "suite"})
        if (k != rep.kind && doc.contains(k))
            schema_fail("scenario", std::string("stray \"") + k + "\" payload for kind \"" +
                                        rep.kind + "\"");
    const Json& payload = doc[rep.kind];
    int jobs = resolve_jobs(opt.jobs);

    Checks checks;
    Json details;
    if (rep.kind == "mmp") {
        std::string task = get_string(payload, "task", "", "mmp");
        if (task == "trace")
            run_mmp_trace(payload, opt, rep.name, rep.paper_ref, checks, details, dry);
        else if (task == "corpus")
            run_mmp_corpus(payload, opt, rep.name, rep.paper_ref, seed, jobs, checks, details, dry);
        else
            schema_fail("mmp.task", "expected \"trace\" or \"corpus\"");
    } else if (rep.kind == "elliptic") {
        std::string task = get_string(payload, "task", "", "elliptic");
        if (task == "linear" || task == "semilinear")
            run_elliptic_solve(payload, opt, rep.name, rep.paper_ref, task == "semilinear", checks,
                               details, dry);
        else if (task == "stability")
            run_elliptic_stability(payload, opt, rep.name, rep.paper_ref, seed, checks, details,
                                   dry);
        else
            schema_fail("elliptic.task", "expected \"linear\", \"semilinear\", or \"stability\"");
    } else if (rep.kind == "flow") {
        std::string task = get_string(payload, "task", "", "flow");
        if (task == "run")
            run_flow_plain(payload, opt, rep.name, rep.paper_ref, checks, details, dry);
        else if (task == "smoothing_sweep")
            run_flow_smoothing(payload, opt, rep.name, rep.paper_ref, jobs, checks, details, dry);
        else if (task == "comparison")
            run_flow_comparison(payload, opt, rep.name, rep.paper_ref, seed, jobs, checks, details,
                                dry);
        else if (task == "perturbation")
            run_flow_perturbation(payload, opt, rep.name, rep.paper_ref, checks, details, dry);
        else if (task == "normalized_convergence")
            run_flow_normalized(payload, opt, rep.name, rep.paper_ref, checks, details, dry);
        else if (task == "curvature_monitor")
            run_flow_curvature(payload, opt, rep.name, rep.paper_ref, jobs, checks, details, dry);
        else
            schema_fail("flow.task",
                        "expected \"run\", \"smoothing_sweep\", \"comparison\", \"perturbation\", "
                        "\"normalized_convergence\", or \"curvature_monitor\"");
    } else if (rep.kind == "sphere") {
        std::string task = get_string(payload, "task", "", "sphere");
        if (task == "run")
            run_sphere_plain(payload, opt, rep.name, rep.paper_ref, checks, details, dry);
        else if (task == "extinction")
            run_sphere_extinction(payload, opt, rep.name, rep.paper_ref, jobs, checks, details,
                                  dry);
        else
            schema_fail("sphere.task", "expected \"run\" or \"extinction\"");
    } else if (rep.kind == "suite") {
        run_suite(payload, opt, checks, details, dry, depth);
    } else {
        schema_fail("scenario.kind",
                    "expected \"mmp\", \"flow\", \"elliptic\", \"sphere\", or \"suite\"");
    }

    rep.checks_passed = checks.all;
    rep.notes = std::move(checks.notes);
    rep.details = std::move(details);
    if (!dry) {
        Json summary = {{"name", rep.name},
                        {"kind", rep.kind},
                        {"paper_ref", rep.paper_ref},
                        {"checks_passed", rep.checks_passed},
                        {"notes", rep.notes},
                        {"details", rep.details}};
        write_json_file(artifact_path(opt, rep.name, "_summary.json"), summary);
    }
    return rep;
}

int run_parsed(const Json& doc, const RunOptions& opt, const std::string& diag_stem) {
    try {
        ScenarioReport rep = execute_impl(doc, opt, false, 0);
        for (const std::string& line : rep.notes) std::cout << line << "\n";
        if (rep.details.contains("table")) std::cout << rep.details["table"].get<std::string>();
        std::cout << (rep.checks_passed ? "all checks passed" : "checks FAILED") << " ("
                  << rep.name << ")\n";
        return rep.checks_passed ? 0 : 1;
    } catch (const SchemaError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        Json diag = {{"error", {{"type", "engine_error"}, {"message", e.what()}}},
                     {"scenario", diag_stem}};
        try {
            write_json_file(artifact_path(opt, diag_stem, "_diagnostic.json"), diag);
        } catch (...) {
        }
        std::cerr << "engine error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int resolve_jobs(int requested) {
    int jobs = std::max(1, requested);
    unsigned hw = std::thread::hardware_concurrency();
    if (hw > 0) jobs = std::min(jobs, int(hw));
    if (const char* env = std::getenv("RICCI_MMP_THREADS")) {
        char* end = nullptr;
        long cap = std::strtol(env, &end, 10);
        if (end != env && cap >= 1 && cap < 1024) jobs = std::min(jobs, int(cap));
    }
    return jobs;
}

ScenarioReport execute_scenario(const Json& doc, const RunOptions& opt) {
    return execute_impl(doc, opt, false, 0);
}

int run_scenario_file(const std::string& path, const RunOptions& opt) {
    Json doc;
    try {
        doc = load_json_file(path);
    } catch (const SchemaError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    }
    RunOptions local = opt;
    if (local.scenario_dir.empty()) {
        std::filesystem::path parent = std::filesystem::path(path).parent_path();
        local.scenario_dir = parent.empty() ? "." : parent.string();
    }
    std::string stem = std::filesystem::path(path).stem().string();
    if (doc.is_object() && doc.contains("out_dir") && doc["out_dir"].is_string() &&
        opt.out_dir == ".")
        local.out_dir = doc["out_dir"].get<std::string>();
    return run_parsed(doc, local, stem.empty() ? "scenario" : stem);
}

int validate_scenario_file(const std::string& path) {
    try {
        Json doc = load_json_file(path);
        RunOptions opt;
        (void)execute_impl(doc, opt, true, 0);
        return 0;
    } catch (const SchemaError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    }
}

const std::vector<SuiteInfo>& suite_registry() { return registry(); }

bool is_suite_name(const std::string& name) {
    for (const SuiteInfo& s : registry())
        if (s.name == name) return true;
    return false;
}

int run_suite_by_name(const std::string& name, const RunOptions& opt) {
    const SuiteInfo* info = nullptr;
    for (const SuiteInfo& s : registry())
        if (s.name == name) info = &s;
    if (!info) {
        std::cerr << "input error: unknown suite \"" << name << "\"\n";
        return 2;
    }
    Json doc = {{"schema", 1},
                {"kind", "suite"},
                {"name", info->name},
                {"paper_ref", info->result},
                {"suite", {{"name", info->name}}}};
    return run_parsed(doc, opt, info->name);
}

std::string render_suites_table() {
    std::string out;
    for (const SuiteInfo& s : registry()) {
        std::string line = s.name;
        line.resize(std::max<size_t>(line.size() + 2, 30), ' ');
        line += s.result;
        line.resize(std::max<size_t>(line.size() + 2, 42), ' ');
        line += s.summary + "\n";
        out += line;
    }
    return out;
}

}  // namespace ricci_mmp
