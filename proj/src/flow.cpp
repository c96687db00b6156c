#include "ricci_mmp/flow.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ricci_mmp/elliptic.hpp"

namespace ricci_mmp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Precomputed per-run data: densities realized once, masks fixed, and the
// positivity floor used where enforcement is excluded.
struct Workspace {
    FlowConfig cfg;
    ScalarField base;   // (1 - delta) * g0 density + s
    ScalarField f_eff;  // perturbed volume density
    ScalarField chi;
    std::vector<unsigned char> enforce_mask;  // distance >= h from degeneracy
    std::vector<unsigned char> region_mask;   // distance >= 0.1
    double floor = 0.0;

    double nu() const { return cfg.mode == FlowMode::Normalized ? 1.0 : 0.0; }

    ScalarField half_lap(const ScalarField& u) const {
        ScalarField l = cfg.use_fd_laplacian ? fd_laplacian(u) : spectral_laplacian(u);
        scale_in_place(l, 0.5);
        return l;
    }

    ScalarField g_at(double t) const {
        ScalarField g = base;
        if (cfg.mode == FlowMode::Unnormalized) {
            add_scaled(g, t, chi);
        } else {
            double e = std::exp(-t);
            scale_in_place(g, e);
            add_scaled(g, 1.0 - e, chi);
        }
        return g;
    }
};

Workspace make_workspace(const FlowConfig& c) {
    make_grid(c.grid.n);  // revalidates the grid size
    if (!(c.t_end > 0)) throw FlowError("t_end must be positive");
    if (!(c.newton_tol > 0) || !(c.step_tol > 0)) throw FlowError("tolerances must be positive");
    if (!(c.dt_min > 0) || c.dt_min > c.dt_init || c.dt_init > c.dt_max)
        throw FlowError("need 0 < dt_min <= dt_init <= dt_max");
    const PerturbationParams& p = c.perturbation;
    if (p.s < 0 || p.w < 0 || p.r < 0) throw FlowError("perturbation sizes must be nonnegative");
    if (!(std::abs(p.delta) < 1.0)) throw FlowError("class shrink must stay below 1");

    Workspace ws;
    ws.cfg = c;
    ws.base = build_density(c.grid, c.g0);
    scale_in_place(ws.base, 1.0 - p.delta);
    shift_in_place(ws.base, p.s);
    ws.f_eff = perturbed_density(c.grid, c.bigF, p.w, p.r);
    if (c.chi_mode == ChiMode::FromF) {
        ws.chi = chi_from_density(c.grid, c.bigF);
    } else {
        if (!c.prescribed_chi) throw FlowError("prescribed chi mode needs a chi field");
        if (!(c.prescribed_chi->grid == c.grid)) throw FlowError("prescribed chi grid mismatch");
        if (!(field_min(*c.prescribed_chi) > 0)) throw FlowError("prescribed chi must be positive");
        ws.chi = *c.prescribed_chi;
    }
    auto pts = degeneracy_points(c.g0);
    auto more = degeneracy_points(c.bigF);
    pts.insert(pts.end(), more.begin(), more.end());
    ws.enforce_mask = smooth_region_mask(c.grid, pts, c.grid.h());
    ws.region_mask = smooth_region_mask(c.grid, pts, 0.1);
    ws.floor = 1e-12 * std::max(1.0, field_mean(ws.f_eff));
    return ws;
}

double enforced_min(const Workspace& ws, const ScalarField& G) {
    double m = kInf;
    for (size_t i = 0; i < G.values.size(); ++i)
        if (ws.enforce_mask[i]) m = std::min(m, G.values[i]);
    return m;
}

ScalarField rate_field(const Workspace& ws, const ScalarField& G, const ScalarField& phi) {
    ScalarField out = G;
    double nu = ws.nu();
    for (size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = std::log(std::max(G.values[i], ws.floor) / ws.f_eff.values[i]) -
                        nu * phi.values[i];
    return out;
}

// One implicit Euler stage, solved for the rate v = (phi+ - phi)/dt. In that
// variable the stage equation reads
//     F e^{nu phi} e^{(1 + nu dt) v} - dt lap(v)/2 = g_next + lap(phi)/2,
// so the stage metric density e^{...} is positive by construction and near-
// degenerate data needs no feasibility line search; the log form stalls there
// because clamping kills its Newton derivative.
FlowState step_core(const Workspace& ws, const FlowState& state, double t_next, double dt) {
    const FlowConfig& c = ws.cfg;
    double nu = ws.nu();
    double slope = 1.0 + nu * dt;
    const ScalarField& phi_old = state.phi;

    ScalarField g_expl = ws.g_at(t_next);
    add_scaled(g_expl, 1.0, ws.half_lap(phi_old));

    ScalarField fnu = ws.f_eff;
    if (nu > 0)
        for (size_t i = 0; i < fnu.values.size(); ++i)
            fnu.values[i] *= std::exp(nu * phi_old.values[i]);

    auto metric = [&](const ScalarField& rate) {
        ScalarField m = fnu;
        for (size_t i = 0; i < m.values.size(); ++i)
            m.values[i] *= std::exp(slope * rate.values[i]);
        return m;
    };
    auto residual = [&](const ScalarField& rate, const ScalarField& m) {
        ScalarField r = ws.half_lap(rate);
        for (size_t i = 0; i < r.values.size(); ++i)
            r.values[i] = m.values[i] - dt * r.values[i] - g_expl.values[i];
        return r;
    };

    ScalarField v = state.phi_dot;  // warm start from the last accepted rate
    ScalarField m = metric(v);
    ScalarField R = residual(v, m);
    double rnorm = sup_abs(R);
    if (!std::isfinite(rnorm)) throw StepRejected("nonfinite stage residual");
    double tol = c.newton_tol * std::max(1.0, sup_abs(g_expl));

    for (int iter = 0; iter < 50 && rnorm > tol; ++iter) {
        ScalarField weight = m;
        scale_in_place(weight, slope);
        ScalarField b = R;
        scale_in_place(b, -1.0);
        double wbar = field_mean(weight);
        // Mean stage density underflowing to 0 means the class volume has run
        // out at this time (finite-time extinction), not a solver bug.
        if (!(wbar > 0) || !std::isfinite(wbar)) throw StepRejected("stage metric density collapsed");
        auto apply = [&](const ScalarField& u) {
            ScalarField out = ws.half_lap(u);
            for (size_t i = 0; i < out.values.size(); ++i)
                out.values[i] = weight.values[i] * u.values[i] - dt * out.values[i];
            return out;
        };
        auto precond = [&](const ScalarField& q) { return inverse_helmholtz(q, wbar, 0.5 * dt); };
        ScalarField delta = constant_field(v.grid, 0.0);
        double cg_tol = std::min(tol, rnorm) * 1e-3;
        if (preconditioned_cg(apply, precond, b, delta, cg_tol, 400) < 0)
            throw StepRejected("inner linear solve failed");

        bool accepted = false;
        double lam = 1.0;
        for (int halve = 0; halve <= 30; ++halve, lam *= 0.5) {
            ScalarField cand = v;
            add_scaled(cand, lam, delta);
            ScalarField mc = metric(cand);
            ScalarField rc_field = residual(cand, mc);
            double rc = sup_abs(rc_field);
            if (rc < rnorm) {
                v = std::move(cand);
                m = std::move(mc);
                R = std::move(rc_field);
                rnorm = rc;
                accepted = true;
                break;
            }
        }
        if (!accepted) throw StepRejected("newton damping exhausted");
    }
    if (rnorm > tol) throw StepRejected("newton did not converge");

    FlowState next;
    next.t = t_next;
    next.phi = phi_old;
    add_scaled(next.phi, dt, v);
    ScalarField G = ws.g_at(t_next);
    add_scaled(G, 1.0, ws.half_lap(next.phi));
    if (!(enforced_min(ws, G) > 0)) throw StepRejected("nonpositive metric density at solution");
    next.phi_dot = std::move(v);
    next.monitors = state.monitors;
    return next;
}

double curvature_sup(const Workspace& ws, const ScalarField& G) {
    ScalarField lg = G;
    for (double& v : lg.values) v = std::log(std::max(v, ws.floor));
    ScalarField s = fd_laplacian(lg);
    double m = 0.0;
    for (size_t i = 0; i < s.values.size(); ++i)
        if (ws.region_mask[i]) m = std::max(m, std::abs(s.values[i] / G.values[i]));
    return m;
}

MonitorSample sample_from(const Workspace& ws, const FlowState& st) {
    ScalarField lap = ws.half_lap(st.phi);
    ScalarField g = ws.g_at(st.t);
    ScalarField G = g;
    add_scaled(G, 1.0, lap);

    MonitorSample s{};
    s.t = st.t;
    double rmin = kInf, rmax = -kInf;
    for (size_t i = 0; i < G.values.size(); ++i) {
        double ratio = G.values[i] / ws.f_eff.values[i];
        rmin = std::min(rmin, ratio);
        rmax = std::max(rmax, ratio);
    }
    s.volume_ratio_min = rmin;
    s.volume_ratio_max = rmax;
    s.class_mass = field_integral(G);
    s.phi_inf_norm = sup_abs(st.phi);
    s.phi_dot_inf_norm = sup_abs(st.phi_dot);
    s.phi_dot_sup = field_max(st.phi_dot);
    long double acc = 0.0L;
    for (double v : st.phi_dot.values) acc += std::abs(v);
    s.phi_dot_l1 = double(acc) * st.phi.grid.h() * st.phi.grid.h();
    s.scalar_curvature_inf_norm = curvature_sup(ws, G);
    double gap = 0.0;
    for (size_t i = 0; i < G.values.size(); ++i)
        gap = std::max(gap, std::abs(ws.chi.values[i] + lap.values[i] -
                                     std::exp(st.phi.values[i]) * ws.f_eff.values[i]));
    s.fixed_point_gap = gap;
    return s;
}

FlowState initial_state_ws(const Workspace& ws, ScalarField phi0) {
    if (!(phi0.grid == ws.cfg.grid)) throw FlowError("initial potential grid mismatch");
    for (double v : phi0.values)
        if (!std::isfinite(v)) throw FlowError("initial potential not finite");
    FlowState st;
    st.t = 0.0;
    ScalarField G = ws.g_at(0.0);
    add_scaled(G, 1.0, ws.half_lap(phi0));
    if (!(enforced_min(ws, G) > 0))
        throw FlowError("initial metric density not positive away from degeneracy points");
    st.phi = std::move(phi0);
    st.phi_dot = rate_field(ws, G, st.phi);
    st.monitors.samples.push_back(sample_from(ws, st));
    return st;
}

struct Member {
    Workspace ws;
    FlowState state;
};

using FamilyCallback = std::function<void(double, std::vector<Member>&)>;

// Shared adaptive controller for a family of flows: every member advances on
// one time grid, any rejection halves dt for all, stop times are hit exactly.
void advance_family(const FlowConfig& drive, std::vector<Member>& fam, double t_end,
                    const std::vector<double>& stops, const FamilyCallback& on_stop,
                    const FamilyCallback& on_step) {
    double dtc = std::clamp(drive.dt_init, drive.dt_min, drive.dt_max);
    int streak = 0;
    double t = fam.front().state.t;
    size_t si = 0;
    while (si < stops.size() && stops[si] <= t + 1e-15) {
        if (on_stop) on_stop(t, fam);
        ++si;
    }
    while (t < t_end - 1e-12) {
        double stop = t_end;
        if (si < stops.size() && stops[si] < t_end) stop = stops[si];
        double remaining = stop - t;
        double t_next;
        if (remaining <= dtc * (1.0 + 1e-9)) t_next = stop;
        else if (remaining < 2.0 * dtc) t_next = t + 0.5 * remaining;  // avoid a sliver step
        else t_next = t + dtc;
        double dt = t_next - t;

        std::vector<FlowState> staged;
        staged.reserve(fam.size());
        bool ok = true;
        std::string reason;
        try {
            for (Member& m : fam) staged.push_back(step_core(m.ws, m.state, t_next, dt));
        } catch (const StepRejected& e) {
            ok = false;
            reason = e.what();
        }
        if (!ok) {
            dtc *= 0.5;
            streak = 0;
            if (dtc < drive.dt_min)
                throw MinStepUnderflow("dt underflow at t = " + std::to_string(t) + ": " + reason);
            continue;
        }
        for (size_t i = 0; i < fam.size(); ++i) fam[i].state = std::move(staged[i]);
        t = t_next;
        for (Member& m : fam) m.state.monitors.samples.push_back(sample_from(m.ws, m.state));
        if (on_step) on_step(t, fam);
        if (++streak >= 5) {
            dtc = std::min(dtc * 1.2, drive.dt_max);
            streak = 0;
        }
        while (si < stops.size() && t >= stops[si] - 1e-15) {
            if (on_stop) on_stop(t, fam);
            ++si;
        }
    }
}

}  // namespace

ScalarField rough_initial_potential(PeriodicGrid grid, const DensitySpec& g0,
                                    const DensitySpec& target, double tol) {
    return solve_linear_ma(build_density(grid, g0), build_density(grid, target), tol).phi;
}

ScalarField smooth_approximation_sequence(PeriodicGrid grid, const DensitySpec& g0,
                                          const DensitySpec& target, int j, double tol) {
    if (j < 1) throw FlowError("mollification mode must be >= 1");
    ScalarField f = build_density(grid, target);
    double mass = field_mean(f);
    ScalarField fj = low_pass(f, j);
    double floor = 1e-10 * field_max(f);
    for (double& v : fj.values) v = std::max(v, floor);
    scale_in_place(fj, mass / field_mean(fj));
    return solve_linear_ma(build_density(grid, g0), fj, tol).phi;
}

FlowState make_initial_state(const FlowConfig& config, ScalarField phi0) {
    Workspace ws = make_workspace(config);
    return initial_state_ws(ws, std::move(phi0));
}

FlowState step(const FlowState& state, const FlowConfig& config, double dt) {
    if (!(dt > 0)) throw FlowError("dt must be positive");
    Workspace ws = make_workspace(config);
    return step_core(ws, state, state.t + dt, dt);
}

FlowState run_flow(const FlowConfig& config, const ScalarField& phi0) {
    std::vector<Member> fam;
    fam.push_back({make_workspace(config), FlowState{}});
    fam[0].state = initial_state_ws(fam[0].ws, phi0);
    advance_family(config, fam, config.t_end, {}, nullptr, nullptr);
    return std::move(fam[0].state);
}

MonitorSample compute_monitor_sample(const FlowState& state, const FlowConfig& config) {
    Workspace ws = make_workspace(config);
    return sample_from(ws, state);
}

double scalar_curvature_monitor(const FlowState& state, const FlowConfig& config) {
    Workspace ws = make_workspace(config);
    ScalarField G = ws.g_at(state.t);
    add_scaled(G, 1.0, ws.half_lap(state.phi));
    return curvature_sup(ws, G);
}

VolumeBandReport volume_band_check(const MonitorLog& log, double t_min, double t_small) {
    if (!(t_min > 0)) throw FlowError("t_min must be positive");
    double c = 0.0, cs = 0.0;
    int used = 0;
    for (const MonitorSample& s : log.samples) {
        if (s.t >= t_min) {
            ++used;
            if (s.volume_ratio_min <= 0) {
                c = kInf;
            } else {
                c = std::max(c, s.t * std::log(s.volume_ratio_max));
                c = std::max(c, -s.t * std::log(s.volume_ratio_min));
            }
        }
        if (s.t > 0 && s.t <= t_small)
            cs = s.volume_ratio_min <= 0 ? kInf : std::max(cs, s.t / s.volume_ratio_min);
    }
    if (used < 2) throw InsufficientSamples("volume band fit needs at least two samples past t_min");
    return {c, cs, used};
}

ComparisonReport comparison_check(FlowConfig config, const ScalarField& phi0_low,
                                  const ScalarField& phi0_high, double t_end) {
    config.t_end = t_end;
    require_same_grid(phi0_low, phi0_high);
    double disorder = -kInf;
    for (size_t i = 0; i < phi0_low.values.size(); ++i)
        disorder = std::max(disorder, phi0_low.values[i] - phi0_high.values[i]);
    if (disorder > 0) throw FlowError("initial potentials are not ordered");

    std::vector<Member> fam;
    fam.push_back({make_workspace(config), FlowState{}});
    fam.push_back({fam[0].ws, FlowState{}});
    fam[0].state = initial_state_ws(fam[0].ws, phi0_low);
    fam[1].state = initial_state_ws(fam[1].ws, phi0_high);

    ComparisonReport rep{};
    rep.max_order_violation = -kInf;
    auto record_gap = [&rep](double t, std::vector<Member>& f) {
        const auto& lo = f[0].state.phi.values;
        const auto& hi = f[1].state.phi.values;
        double gap = -kInf, viol = -kInf;
        for (size_t i = 0; i < lo.size(); ++i) {
            double d = hi[i] - lo[i];
            gap = std::max(gap, d);
            viol = std::max(viol, -d);
        }
        rep.times.push_back(t);
        rep.sup_gaps.push_back(gap);
        rep.max_order_violation = std::max(rep.max_order_violation, viol);
    };
    record_gap(0.0, fam);
    advance_family(config, fam, t_end, {}, nullptr, record_gap);

    rep.max_gap_increase = -kInf;
    for (size_t k = 1; k < rep.sup_gaps.size(); ++k)
        rep.max_gap_increase = std::max(rep.max_gap_increase, rep.sup_gaps[k] - rep.sup_gaps[k - 1]);
    rep.pass = rep.max_order_violation <= 10.0 * config.step_tol && rep.max_gap_increase <= 1e-12;
    rep.low = std::move(fam[0].state);
    rep.high = std::move(fam[1].state);
    return rep;
}

PerturbationReport perturbation_monotonicity_check(const FlowConfig& config,
                                                   const std::vector<PerturbationParams>& param_grid,
                                                   const std::vector<double>& sample_times) {
    if (param_grid.empty()) throw FlowError("empty parameter grid");
    std::vector<double> stops = sample_times;
    std::sort(stops.begin(), stops.end());
    for (double t : stops)
        if (!(t > 0) || t > config.t_end + 1e-12)
            throw FlowError("sample times must lie in (0, t_end]");

    std::vector<Member> fam;
    for (const PerturbationParams& p : param_grid) {
        FlowConfig c = config;
        c.perturbation = p;
        fam.push_back({make_workspace(c), FlowState{}});
    }
    for (Member& m : fam)
        m.state = initial_state_ws(m.ws, constant_field(config.grid, 0.0));

    PerturbationReport rep{};
    rep.sample_times = stops;
    rep.runs.resize(fam.size());
    for (size_t i = 0; i < fam.size(); ++i) rep.runs[i].params = param_grid[i];
    auto snapshot = [&rep](double, std::vector<Member>& f) {
        for (size_t i = 0; i < f.size(); ++i)
            rep.runs[i].phi_at_samples.push_back(f[i].state.phi);
    };
    advance_family(config, fam, config.t_end, stops, snapshot, nullptr);

    const std::vector<unsigned char>& mask = fam[0].ws.region_mask;
    // Reference member for the (s,w,r) -> 0 convergence question.
    int ref = -1;
    for (size_t i = 0; i < param_grid.size(); ++i)
        if (param_grid[i].s == 0 && param_grid[i].w == 0 && param_grid[i].r == 0) {
            ref = int(i);
            break;
        }
    if (ref >= 0) {
        for (size_t i = 0; i < rep.runs.size(); ++i)
            for (size_t k = 0; k < stops.size(); ++k)
                rep.runs[i].masked_gap_to_reference.push_back(masked_linf_distance(
                    rep.runs[i].phi_at_samples[k], rep.runs[size_t(ref)].phi_at_samples[k], mask));
    }

    // phi decreasing in r, increasing in w and s; compare members that differ
    // in exactly one of the three sizes (delta held equal).
    auto scan = [&](auto pick, bool increasing, double& worst, double& masked_worst) {
        for (size_t i = 0; i < param_grid.size(); ++i) {
            for (size_t j = 0; j < param_grid.size(); ++j) {
                const PerturbationParams &a = param_grid[i], &b = param_grid[j];
                if (a.delta != b.delta || !(pick(a) < pick(b))) continue;
                int diffs = (a.s != b.s) + (a.w != b.w) + (a.r != b.r);
                if (diffs != 1) continue;
                for (size_t k = 0; k < stops.size(); ++k) {
                    const auto& lo = rep.runs[increasing ? i : j].phi_at_samples[k].values;
                    const auto& hi = rep.runs[increasing ? j : i].phi_at_samples[k].values;
                    for (size_t q = 0; q < lo.size(); ++q) {
                        double v = lo[q] - hi[q];  // positive = wrong direction
                        worst = std::max(worst, v);
                        if (mask[q]) masked_worst = std::max(masked_worst, v);
                    }
                }
            }
        }
    };
    rep.max_r_violation = rep.max_w_violation = rep.max_s_violation = -kInf;
    rep.masked_r_violation = rep.masked_w_violation = rep.masked_s_violation = -kInf;
    scan([](const PerturbationParams& p) { return p.r; }, false, rep.max_r_violation,
         rep.masked_r_violation);
    scan([](const PerturbationParams& p) { return p.w; }, true, rep.max_w_violation,
         rep.masked_w_violation);
    scan([](const PerturbationParams& p) { return p.s; }, true, rep.max_s_violation,
         rep.masked_s_violation);
    double eps = 10.0 * config.step_tol;
    rep.monotone = rep.masked_r_violation <= eps && rep.masked_w_violation <= eps &&
                   rep.masked_s_violation <= eps;
    return rep;
}

NormalizedConvergenceReport normalized_convergence_check(const FlowConfig& config,
                                                         const ScalarField& phi0, double tol) {
    if (config.mode != FlowMode::Normalized || config.chi_mode != ChiMode::Prescribed)
        throw FlowError("convergence check needs Normalized mode with prescribed chi");
    if (!(tol > 0)) throw FlowError("tolerance must be positive");

    std::vector<Member> fam;
    fam.push_back({make_workspace(config), FlowState{}});
    EllipticSolution limit = solve_semilinear_ma(fam[0].ws.chi, fam[0].ws.f_eff, 1e-12);
    fam[0].state = initial_state_ws(fam[0].ws, phi0);
    advance_family(config, fam, config.t_end, {}, nullptr, nullptr);
    FlowState st = std::move(fam[0].state);

    double gap = linf_distance(st.phi, limit.phi);
    if (gap > tol) throw NotConverged(gap);

    double fit_end = std::min(5.0, config.t_end);
    double c = 0.0;
    for (const MonitorSample& s : st.monitors.samples)
        if (s.t >= 1.0 && s.t <= fit_end)
            c = std::max(c, std::max(s.phi_dot_sup, 0.0) / (s.t * std::exp(-s.t)));
    bool envelope_ok = true, l1_monotone = true;
    double prev_l1 = kInf;
    for (const MonitorSample& s : st.monitors.samples) {
        if (s.t < 1.0) continue;
        double env = 1.05 * c * s.t * std::exp(-s.t) + 1e-10;
        if (std::max(s.phi_dot_sup, 0.0) > env) envelope_ok = false;
        if (s.phi_dot_l1 > prev_l1 + 1e-12) l1_monotone = false;
        prev_l1 = s.phi_dot_l1;
    }
    double l1_final = st.monitors.samples.back().phi_dot_l1;

    NormalizedConvergenceReport rep{gap,        c,    envelope_ok,
                                    l1_monotone, l1_final,
                                    envelope_ok && l1_monotone && l1_final < tol,
                                    std::move(limit.phi), std::move(st)};
    return rep;
}

}  // namespace ricci_mmp
