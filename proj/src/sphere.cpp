#include "ricci_mmp/sphere.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ricci_mmp {
namespace {

// Half-point sines sin(k pi / m), k = 0..m; both endpoints forced to exact
// zero so the pole fluxes vanish identically (sin(pi) rounds to ~1e-16).
std::vector<double> half_sines(const LatitudeGrid& g) {
    std::vector<double> s(g.m + 1);
    for (int k = 1; k < g.m; ++k) s[k] = std::sin(k * M_PI / g.m);
    s[0] = 0.0;
    s[g.m] = 0.0;
    return s;
}

std::vector<double> center_sines(const LatitudeGrid& g) {
    std::vector<double> s(g.m);
    for (int k = 0; k < g.m; ++k) s[k] = std::sin(g.theta(k));
    return s;
}

double vec_min(const std::vector<double>& v) {
    double m = v[0];
    for (double x : v) m = std::min(m, x);
    return m;
}

double vec_max(const std::vector<double>& v) {
    double m = v[0];
    for (double x : v) m = std::max(m, x);
    return m;
}

double vec_sup_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

void check_state(const LatitudeGrid& g, const ConformalState& st) {
    if (int(st.v.size()) != g.m) throw FlowError("state does not match the latitude grid");
    for (double x : st.v)
        if (!(x > 0) || !std::isfinite(x)) throw FlowError("conformal factor must be positive");
}

// Mean curvature of the current metric, int K dA / int dA. On the conserved-
// area manifold this equals 1/T0, but measuring it keeps the discrete flow on
// that manifold: with a frozen 1/T0 the area mode is unstable (rate 1/T0) and
// quadrature error grows like e^{t/T0}, which ruins long runs.
double mean_curvature(const LatitudeGrid& g, const std::vector<double>& v) {
    std::vector<double> K = gauss_curvature(g, v);
    std::vector<double> kv(g.m);
    for (int k = 0; k < g.m; ++k) kv[k] = K[k] * v[k];
    return sphere_quadrature(g, kv) / sphere_quadrature(g, v);
}

// Solves c1 e^u - dt lap(u)/2 = rhs for u by damped Newton; the linearized
// rows are tridiagonal and strictly diagonally dominant, so plain Thomas
// elimination is stable. Warm start from u0.
std::vector<double> stage_solve(const LatitudeGrid& g, const std::vector<double>& s_half,
                                const std::vector<double>& s_center, double c1, double dt,
                                const std::vector<double>& rhs, std::vector<double> u,
                                double newton_tol) {
    const int m = g.m;
    const double inv_h2 = 1.0 / (g.dtheta() * g.dtheta());
    auto residual = [&](const std::vector<double>& w) {
        std::vector<double> r(m);
        for (int k = 0; k < m; ++k) {
            double lo = k > 0 ? s_half[k] * (w[k] - w[k - 1]) : 0.0;
            double hi = k + 1 < m ? s_half[k + 1] * (w[k + 1] - w[k]) : 0.0;
            double lap = (hi - lo) * inv_h2 / s_center[k];
            r[k] = c1 * std::exp(w[k]) - 0.5 * dt * lap - rhs[k];
        }
        return r;
    };

    std::vector<double> R = residual(u);
    double rnorm = vec_sup_abs(R);
    if (!std::isfinite(rnorm)) throw StepRejected("nonfinite stage residual");
    double tol = newton_tol * std::max(1.0, vec_sup_abs(rhs));

    std::vector<double> sub(m), diag(m), sup(m), b(m), work(m), delta(m);
    for (int iter = 0; iter < 50 && rnorm > tol; ++iter) {
        for (int k = 0; k < m; ++k) {
            double lo = 0.5 * dt * (k > 0 ? s_half[k] : 0.0) * inv_h2 / s_center[k];
            double hi = 0.5 * dt * (k + 1 < m ? s_half[k + 1] : 0.0) * inv_h2 / s_center[k];
            sub[k] = -lo;
            sup[k] = -hi;
            diag[k] = c1 * std::exp(u[k]) + lo + hi;
            b[k] = -R[k];
        }
        // Thomas sweep.
        work[0] = sup[0] / diag[0];
        b[0] /= diag[0];
        for (int k = 1; k < m; ++k) {
            double denom = diag[k] - sub[k] * work[k - 1];
            work[k] = sup[k] / denom;
            b[k] = (b[k] - sub[k] * b[k - 1]) / denom;
        }
        delta[m - 1] = b[m - 1];
        for (int k = m - 2; k >= 0; --k) delta[k] = b[k] - work[k] * delta[k + 1];

        bool accepted = false;
        double lam = 1.0;
        for (int halve = 0; halve <= 30; ++halve, lam *= 0.5) {
            std::vector<double> cand(m);
            for (int k = 0; k < m; ++k) cand[k] = u[k] + lam * delta[k];
            std::vector<double> Rc = residual(cand);
            double rc = vec_sup_abs(Rc);
            if (rc < rnorm) {
                u = std::move(cand);
                R = std::move(Rc);
                rnorm = rc;
                accepted = true;
                break;
            }
        }
        if (!accepted) throw StepRejected("newton damping exhausted");
    }
    if (rnorm > tol) throw StepRejected("newton did not converge");
    return u;
}

ConformalState step_common(const LatitudeGrid& g, const ConformalState& state, double c1,
                           double dt, double newton_tol) {
    check_state(g, state);
    if (!(dt > 0)) throw FlowError("step size must be positive");
    std::vector<double> s_half = half_sines(g);
    std::vector<double> s_center = center_sines(g);
    std::vector<double> rhs(g.m), u0(g.m);
    for (int k = 0; k < g.m; ++k) {
        rhs[k] = state.v[k] - dt;
        u0[k] = std::log(state.v[k]);
    }
    std::vector<double> u =
        stage_solve(g, s_half, s_center, c1, dt, rhs, std::move(u0), newton_tol);
    ConformalState next;
    next.t = state.t + dt;
    next.v.resize(g.m);
    for (int k = 0; k < g.m; ++k) next.v[k] = std::exp(u[k]);
    return next;
}

SphereMonitorSample sample_state(const LatitudeGrid& g, const ConformalState& st) {
    SphereMonitorSample s;
    s.t = st.t;
    s.area = sphere_area(g, st.v);
    s.min_v = vec_min(st.v);
    s.max_v = vec_max(st.v);
    std::vector<double> K = gauss_curvature(g, st.v);
    s.max_abs_k = vec_sup_abs(K);
    std::vector<double> kv(g.m);
    for (int k = 0; k < g.m; ++k) kv[k] = K[k] * st.v[k];
    s.gauss_bonnet_residual = std::abs(sphere_quadrature(g, kv) - 4.0 * M_PI) / (4.0 * M_PI);
    return s;
}

void check_config(const SphereConfig& c) {
    if (!(c.t_end > 0)) throw FlowError("t_end must be positive");
    if (!(c.newton_tol > 0)) throw FlowError("tolerances must be positive");
    if (!(c.dt_min > 0) || !(c.dt_min <= c.dt_init) || !(c.dt_init <= c.dt_max))
        throw FlowError("need 0 < dt_min <= dt_init <= dt_max");
}

// Shared adaptive controller: exact stop-time hits, halving on rejection,
// regrowth after a streak of accepts. stop(state) ends the run early.
template <class Step, class Stop>
SphereRunResult drive(const LatitudeGrid& g, const SphereConfig& c, ConformalState st,
                      double t_end, const Step& one_step, const Stop& stop) {
    SphereRunResult out;
    out.monitors.samples.push_back(sample_state(g, st));
    double dtc = c.dt_init;
    int streak = 0;
    while (st.t < t_end - 1e-15 && !stop(st)) {
        double remaining = t_end - st.t;
        double dt = dtc;
        if (remaining <= dtc * (1.0 + 1e-9))
            dt = remaining;
        else if (remaining < 2.0 * dtc)
            dt = remaining / 2.0;
        try {
            st = one_step(st, dt);
            out.monitors.samples.push_back(sample_state(g, st));
            if (++streak >= 5) {
                dtc = std::min(dtc * 1.2, c.dt_max);
                streak = 0;
            }
        } catch (const StepRejected& e) {
            streak = 0;
            dtc *= 0.5;
            if (dtc < c.dt_min)
                throw MinStepUnderflow(std::string("step size underflow at t = ") +
                                       std::to_string(st.t) + ": " + e.what());
        }
    }
    out.state = std::move(st);
    return out;
}

}  // namespace

LatitudeGrid make_latitude_grid(int m) {
    if (m < 32) throw FlowError("latitude grid needs m >= 32");
    return LatitudeGrid{m};
}

std::vector<double> profile_from_cosines(const LatitudeGrid& grid,
                                         const std::vector<double>& coeffs) {
    if (coeffs.empty()) throw FlowError("profile needs at least one coefficient");
    std::vector<double> v(grid.m, 0.0);
    for (int k = 0; k < grid.m; ++k) {
        double th = grid.theta(k);
        for (size_t j = 0; j < coeffs.size(); ++j) v[k] += coeffs[j] * std::cos(j * th);
    }
    for (double x : v)
        if (!(x > 0)) throw FlowError("profile must be strictly positive");
    return v;
}

std::vector<double> round_laplacian(const LatitudeGrid& grid, const std::vector<double>& f) {
    if (int(f.size()) != grid.m) throw FlowError("field does not match the latitude grid");
    std::vector<double> s_half = half_sines(grid);
    std::vector<double> s_center = center_sines(grid);
    const double inv_h2 = 1.0 / (grid.dtheta() * grid.dtheta());
    std::vector<double> out(grid.m);
    for (int k = 0; k < grid.m; ++k) {
        double lo = k > 0 ? s_half[k] * (f[k] - f[k - 1]) : 0.0;
        double hi = k + 1 < grid.m ? s_half[k + 1] * (f[k + 1] - f[k]) : 0.0;
        out[k] = (hi - lo) * inv_h2 / s_center[k];
    }
    return out;
}

double sphere_quadrature(const LatitudeGrid& grid, const std::vector<double>& f) {
    if (int(f.size()) != grid.m) throw FlowError("field does not match the latitude grid");
    long double acc = 0.0;
    for (int k = 0; k < grid.m; ++k) acc += (long double)(std::sin(grid.theta(k))) * f[k];
    return double(acc * 2.0 * M_PI * grid.dtheta());
}

double sphere_area(const LatitudeGrid& grid, const std::vector<double>& v) {
    return sphere_quadrature(grid, v);
}

std::vector<double> gauss_curvature(const LatitudeGrid& grid, const std::vector<double>& v) {
    if (int(v.size()) != grid.m) throw FlowError("field does not match the latitude grid");
    for (double x : v)
        if (!(x > 0) || !std::isfinite(x)) throw FlowError("conformal factor must be positive");
    std::vector<double> logv(grid.m);
    for (int k = 0; k < grid.m; ++k) logv[k] = std::log(v[k]);
    std::vector<double> lap = round_laplacian(grid, logv);
    std::vector<double> K(grid.m);
    for (int k = 0; k < grid.m; ++k) K[k] = (1.0 - 0.5 * lap[k]) / v[k];
    return K;
}

double gauss_bonnet_residual(const LatitudeGrid& grid, const std::vector<double>& v) {
    std::vector<double> K = gauss_curvature(grid, v);
    std::vector<double> kv(grid.m);
    for (int k = 0; k < grid.m; ++k) kv[k] = K[k] * v[k];
    return std::abs(sphere_quadrature(grid, kv) - 4.0 * M_PI) / (4.0 * M_PI);
}

ConformalState step_unnormalized(const LatitudeGrid& grid, const ConformalState& state,
                                 double dt) {
    return step_common(grid, state, 1.0, dt, 1e-11);
}

ConformalState step_normalized_fano(const LatitudeGrid& grid, const ConformalState& state,
                                    double T0, double dt) {
    if (!(T0 > 0)) throw FlowError("normalization time must be positive");
    check_state(grid, state);
    double c1 = 1.0 - dt * mean_curvature(grid, state.v);
    if (!(c1 > 0)) throw StepRejected("step size reaches the normalization time");
    return step_common(grid, state, c1, dt, 1e-11);
}

SphereRunResult run_sphere_flow(const SphereConfig& config) {
    check_config(config);
    LatitudeGrid g = make_latitude_grid(config.m);
    ConformalState st;
    st.v = profile_from_cosines(g, config.v0_cos);
    if (config.mode == SphereMode::Unnormalized)
        return drive(
            g, config, std::move(st), config.t_end,
            [&](const ConformalState& s, double dt) {
                return step_common(g, s, 1.0, dt, config.newton_tol);
            },
            [](const ConformalState&) { return false; });
    double T0 = config.T0;
    if (T0 == 0.0) T0 = sphere_area(g, st.v) / (4.0 * M_PI);
    if (!(T0 > 0)) throw FlowError("normalization time must be positive");
    return drive(
        g, config, std::move(st), config.t_end,
        [&](const ConformalState& s, double dt) {
            double c1 = 1.0 - dt * mean_curvature(g, s.v);
            if (!(c1 > 0)) throw StepRejected("step size reaches the normalization time");
            return step_common(g, s, c1, dt, config.newton_tol);
        },
        [](const ConformalState&) { return false; });
}

ExtinctionReport extinction_experiment(const SphereConfig& config, double vanish_tol) {
    check_config(config);
    if (!(vanish_tol > 0)) throw FlowError("vanish tolerance must be positive");
    LatitudeGrid g = make_latitude_grid(config.m);
    ConformalState st;
    st.v = profile_from_cosines(g, config.v0_cos);
    if (vec_min(st.v) < vanish_tol) throw FlowError("initial data already below vanish tolerance");

    ExtinctionReport rep;
    rep.a0 = sphere_area(g, st.v);
    rep.t0_cohomological = rep.a0 / (4.0 * M_PI);
    // Over-generous horizon; the min-v stop fires first on well-posed data.
    double horizon = 3.0 * rep.t0_cohomological;
    SphereRunResult run = drive(
        g, config, std::move(st), horizon,
        [&](const ConformalState& s, double dt) {
            return step_common(g, s, 1.0, dt, config.newton_tol);
        },
        [&](const ConformalState& s) { return vec_min(s.v) < vanish_tol; });
    if (vec_min(run.state.v) >= vanish_tol) throw FlowError("extinction not reached before horizon");

    const auto& samples = run.monitors.samples;
    long double st_ = 0.0, sa = 0.0, stt = 0.0, sta = 0.0;
    for (const SphereMonitorSample& s : samples) {
        st_ += s.t;
        sa += s.area;
        stt += (long double)s.t * s.t;
        sta += (long double)s.t * s.area;
    }
    long double n = samples.size();
    long double var = stt - st_ * st_ / n;
    if (!(var > 0)) throw FlowError("need at least two distinct sample times");
    double beta = double((sta - st_ * sa / n) / var);
    double alpha = double(sa / n) - beta * double(st_ / n);
    if (!(beta < 0)) throw FlowError("area did not decrease; no extinction to extrapolate");
    rep.t_measured = -alpha / beta;
    rep.rel_error = std::abs(rep.t_measured - rep.t0_cohomological) / rep.t0_cohomological;
    rep.pass = rep.rel_error <= 0.02;
    rep.monitors = std::move(run.monitors);
    return rep;
}

}  // namespace ricci_mmp
