#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ricci_mmp/flow.hpp"

using namespace ricci_mmp;

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

DensitySpec unit_spec() { return {}; }

DensitySpec cosine_spec(double amp, int kx, int ky) {
    DensitySpec s;
    s.smooth.modes.push_back({kx, ky, amp, 0.0});
    return s;
}

DensitySpec pole_spec(double order, double x, double y) {
    DensitySpec s;
    s.poles.push_back({x, y, order});
    return s;
}

FlowConfig flat_config(int n) {
    FlowConfig c;
    c.grid = make_grid(n);
    c.g0 = unit_spec();
    c.bigF = unit_spec();
    return c;
}

ScalarField zero_field(PeriodicGrid g) { return constant_field(g, 0.0); }

}  // namespace

TEST_CASE("flat data is an exact fixed point of one step") {
    FlowConfig c = flat_config(16);
    FlowState st = make_initial_state(c, zero_field(c.grid));
    FlowState next = step(st, c, 0.01);
    CHECK(next.t == doctest::Approx(0.01));
    for (double v : next.phi.values) CHECK(v == 0.0);
    CHECK(sup_abs(next.phi_dot) == 0.0);
}

TEST_CASE("constant density ratio integrates to t log 2") {
    FlowConfig c = flat_config(16);
    c.g0.smooth.constant = 2.0;
    c.t_end = 1.0;
    FlowState st = run_flow(c, zero_field(c.grid));
    CHECK(st.t == 1.0);
    ScalarField expect = constant_field(c.grid, std::log(2.0));
    CHECK(linf_distance(st.phi, expect) < 1e-13);
    CHECK(field_max(st.phi) - field_min(st.phi) < 1e-13);
    CHECK(linf_distance(st.phi_dot, expect) < 1e-13);
}

TEST_CASE("normalized constant data follows the scalar decay recursion") {
    FlowConfig c = flat_config(16);
    c.mode = FlowMode::Normalized;
    c.chi_mode = ChiMode::Prescribed;
    c.prescribed_chi = constant_field(c.grid, 1.0);
    c.t_end = 1.0;
    c.dt_init = c.dt_max = 0.005;
    FlowState st = run_flow(c, constant_field(c.grid, 0.5));

    // Implicit Euler on phi' = -phi contracts by 1/(1+dt) each accepted step.
    double predicted = 0.5;
    const auto& s = st.monitors.samples;
    for (size_t k = 1; k < s.size(); ++k) predicted /= 1.0 + (s[k].t - s[k - 1].t);
    CHECK(linf_distance(st.phi, constant_field(c.grid, predicted)) < 1e-10);
    CHECK(std::abs(field_mean(st.phi) - 0.5 * std::exp(-1.0)) < 1e-3);
}

TEST_CASE("class mass evolves linearly to machine precision") {
    PeriodicGrid g = make_grid(64);
    FlowConfig c;
    c.grid = g;
    c.g0 = cosine_spec(0.3, 1, 0);
    c.bigF = unit_spec();
    c.bigF.zeros.push_back({0.25, 0.25, 1.0});
    c.bigF.poles.push_back({0.75, 0.75, 0.5});
    // The zero outweighs the pole, so the class mass decays at rate
    // 2 pi (sum a - sum b) = pi and runs out near t = 0.30; stay inside that.
    c.t_end = 0.25;
    c.perturbation.delta = 0.1;
    c.perturbation.s = 0.05;
    double m0 = field_integral(build_density(g, c.g0)) * (1.0 - 0.1) + 0.05;
    double mchi = field_integral(chi_from_density(g, c.bigF));
    CHECK(mchi == doctest::Approx(-M_PI).epsilon(0.02));

    FlowState st = run_flow(c, zero_field(g));
    REQUIRE(st.monitors.samples.size() > 5);
    for (const MonitorSample& s : st.monitors.samples)
        CHECK(std::abs(s.class_mass - (m0 + s.t * mchi)) < 1e-10 * m0);

    SUBCASE("normalized analogue with exponential weights") {
        FlowConfig cn = flat_config(64);
        cn.mode = FlowMode::Normalized;
        cn.chi_mode = ChiMode::Prescribed;
        cn.prescribed_chi = tabulate(g, [](double x, double) { return 1.0 + 0.2 * std::cos(kTwoPi * x); });
        cn.t_end = 0.5;
        double mc = field_integral(*cn.prescribed_chi);
        FlowState sn = run_flow(cn, zero_field(g));
        for (const MonitorSample& s : sn.monitors.samples) {
            double expect = std::exp(-s.t) * 1.0 + (1.0 - std::exp(-s.t)) * mc;
            CHECK(std::abs(s.class_mass - expect) < 1e-10);
        }
    }
}

TEST_CASE("stationary run gives a zero band constant; empty log is an error") {
    FlowConfig c = flat_config(16);
    c.t_end = 1.0;
    FlowState st = run_flow(c, zero_field(c.grid));
    VolumeBandReport band = volume_band_check(st.monitors, 0.1);
    CHECK(band.c < 1e-10);
    CHECK(band.samples_used > 10);
    CHECK(band.c_small_time == doctest::Approx(0.5).epsilon(0.2));

    CHECK_THROWS_AS(volume_band_check(MonitorLog{}, 0.1), InsufficientSamples);
    CHECK_THROWS_AS(volume_band_check(st.monitors, -1.0), FlowError);
}

TEST_CASE("volume ratio equilibrates to the conserved mass") {
    FlowConfig c = flat_config(64);
    c.g0 = cosine_spec(0.3, 1, 0);
    c.g0.smooth.modes.push_back({0, 1, 0.2, 0.0});
    c.t_end = 1.0;
    FlowState st = run_flow(c, zero_field(c.grid));
    const MonitorSample& last = st.monitors.samples.back();
    CHECK(std::abs(last.volume_ratio_min - 1.0) < 1e-6);
    CHECK(std::abs(last.volume_ratio_max - 1.0) < 1e-6);
    // At t = 0 the ratio spread is the g0 profile itself.
    CHECK(st.monitors.samples.front().volume_ratio_max > 1.2);
}

TEST_CASE("rough initial potential: identity target and pole-growth profile") {
    PeriodicGrid g = make_grid(64);
    ScalarField phi = rough_initial_potential(g, unit_spec(), unit_spec(), 1e-9);
    CHECK(sup_abs(phi) < 1e-13);

    // (0.25, 0.75) sits exactly half a cell from the nearest node at every
    // n divisible by 4, so suprema compare cleanly across resolutions.
    DensitySpec rough = pole_spec(0.6, 0.25, 0.75);
    auto lap_sup = [&](int n) {
        PeriodicGrid gn = make_grid(n);
        ScalarField p = rough_initial_potential(gn, unit_spec(), rough, 1e-8);
        ScalarField l = spectral_laplacian(p);
        return std::pair<double, double>{sup_abs(p), 0.5 * sup_abs(l)};
    };
    auto [p128, l128] = lap_sup(128);
    auto [p256, l256] = lap_sup(256);
    CHECK(p256 == doctest::Approx(p128).epsilon(0.1));  // bounded potential
    CHECK(l256 / l128 > 1.5);                           // unbounded rough Laplacian
}

TEST_CASE("flow smooths rough data uniformly in resolution") {
    DensitySpec rough = pole_spec(0.6, 0.25, 0.75);
    auto run = [&](int n) {
        FlowConfig c = flat_config(n);
        c.t_end = 0.25;
        ScalarField phi0 = rough_initial_potential(c.grid, c.g0, rough, 1e-8);
        double before = 0.5 * sup_abs(spectral_laplacian(phi0));
        FlowState st = run_flow(c, phi0);
        double after = 0.5 * sup_abs(spectral_laplacian(st.phi));
        return std::pair<double, double>{before, after};
    };
    auto [b64, a64] = run(64);
    auto [b128, a128] = run(128);
    CHECK(b128 / b64 > 1.5);                       // rough at t = 0
    CHECK(a128 == doctest::Approx(a64).epsilon(0.25));  // uniformly bounded at t > 0
    CHECK(a64 < b64);
}

TEST_CASE("comparison: identical starts stay bitwise identical") {
    FlowConfig c = flat_config(32);
    c.g0 = cosine_spec(0.2, 1, 1);
    // Amplitude small enough that g0 + lap(phi0)/2 stays positive.
    ScalarField phi0 = tabulate(c.grid, [](double x, double y) {
        return 0.002 * std::sin(kTwoPi * (x + 2 * y));
    });
    ComparisonReport rep = comparison_check(c, phi0, phi0, 0.3);
    CHECK(rep.pass);
    CHECK(rep.max_order_violation == 0.0);
    for (double gap : rep.sup_gaps) CHECK(gap == 0.0);
}

TEST_CASE("comparison: constant shift decays like exp(-t) in normalized mode") {
    FlowConfig c = flat_config(16);
    c.mode = FlowMode::Normalized;
    c.chi_mode = ChiMode::Prescribed;
    c.prescribed_chi = constant_field(c.grid, 1.0);
    c.dt_init = c.dt_max = 0.005;
    ComparisonReport rep =
        comparison_check(c, zero_field(c.grid), constant_field(c.grid, 1.0), 1.0);
    CHECK(rep.pass);
    CHECK(rep.sup_gaps.front() == 1.0);
    CHECK(std::abs(rep.sup_gaps.back() - std::exp(-1.0)) < 2e-3);
    CHECK(rep.max_gap_increase < 1e-14);
}

TEST_CASE("comparison: seeded ordered pair keeps its order") {
    FlowConfig c = flat_config(32);
    c.g0 = cosine_spec(0.25, 1, 0);
    c.bigF = cosine_spec(-0.2, 0, 1);
    ScalarField lo = tabulate(c.grid, [](double x, double y) {
        return 0.002 * std::cos(kTwoPi * (2 * x - y));
    });
    ScalarField hi = lo;
    ScalarField bump = tabulate(c.grid, [](double x, double) {
        return 0.01 * (1.0 + std::cos(kTwoPi * x));
    });
    add_scaled(hi, 1.0, bump);
    ComparisonReport rep = comparison_check(c, lo, hi, 0.4);
    CHECK(rep.pass);
    CHECK(rep.max_order_violation <= 10.0 * c.step_tol);
    CHECK_THROWS_AS(comparison_check(c, hi, lo, 0.4), FlowError);  // deliberately disordered
}

TEST_CASE("comparison rejects disordered initial data") {
    FlowConfig c = flat_config(16);
    ScalarField lo = constant_field(c.grid, 0.5);
    CHECK_THROWS_AS(comparison_check(c, lo, zero_field(c.grid), 0.1), FlowError);
}

TEST_CASE("perturbation family orders as r down, w up, s up") {
    FlowConfig c = flat_config(64);
    // Balanced orders keep the class mass level, so the whole family exists
    // well past the last sample time.
    c.bigF.zeros.push_back({0.25, 0.25, 0.5});
    c.bigF.poles.push_back({0.75, 0.75, 0.5});
    c.t_end = 0.3;
    std::vector<PerturbationParams> grid = {
        {0, 0, 0, 0},       {0, 0, 0.01, 0}, {0, 0, 0.1, 0}, {0, 0.01, 0, 0},
        {0, 0.1, 0, 0},     {0.01, 0, 0, 0}, {0.1, 0, 0, 0},
    };
    PerturbationReport rep = perturbation_monotonicity_check(c, grid, {0.1, 0.3});
    CHECK(rep.monotone);
    CHECK(rep.masked_r_violation <= 10.0 * c.step_tol);
    CHECK(rep.masked_w_violation <= 10.0 * c.step_tol);
    CHECK(rep.masked_s_violation <= 10.0 * c.step_tol);
    REQUIRE(rep.runs.size() == grid.size());
    REQUIRE(rep.runs[0].masked_gap_to_reference.size() == 2);
    // Smaller perturbations sit closer to the unperturbed run at every sample.
    for (size_t k = 0; k < 2; ++k) {
        CHECK(rep.runs[1].masked_gap_to_reference[k] <=
              rep.runs[2].masked_gap_to_reference[k] + 1e-12);
        CHECK(rep.runs[3].masked_gap_to_reference[k] <=
              rep.runs[4].masked_gap_to_reference[k] + 1e-12);
        CHECK(rep.runs[5].masked_gap_to_reference[k] <=
              rep.runs[6].masked_gap_to_reference[k] + 1e-12);
        CHECK(rep.runs[0].masked_gap_to_reference[k] == 0.0);
    }
}

TEST_CASE("normalized flow relaxes onto the scalar fixed point") {
    FlowConfig c = flat_config(16);
    c.mode = FlowMode::Normalized;
    c.chi_mode = ChiMode::Prescribed;
    c.prescribed_chi = constant_field(c.grid, 1.0);
    c.t_end = 20.0;
    NormalizedConvergenceReport rep =
        normalized_convergence_check(c, constant_field(c.grid, 0.5), 1e-6);
    CHECK(rep.pass);
    CHECK(rep.final_gap < 1e-6);
    CHECK(rep.l1_final < 1e-6);
    CHECK(rep.l1_monotone);
    CHECK(rep.envelope_ok);
    CHECK(sup_abs(rep.phi_limit) < 1e-12);  // chi = F = 1 fixes phi = 0
}

TEST_CASE("normalized flow reaches the semilinear solution from any start") {
    FlowConfig c = flat_config(64);
    c.mode = FlowMode::Normalized;
    c.chi_mode = ChiMode::Prescribed;
    c.prescribed_chi = tabulate(c.grid, [](double, double y) {
        return 1.0 + 0.3 * std::cos(kTwoPi * y);
    });
    c.t_end = 15.0;
    NormalizedConvergenceReport smooth =
        normalized_convergence_check(c, zero_field(c.grid), 1e-5);
    CHECK(smooth.pass);
    CHECK(smooth.final_gap < 1e-5);
    CHECK(smooth.fitted_c > 0.0);

    ScalarField rough0 = rough_initial_potential(c.grid, c.g0, pole_spec(0.5, 0.3, 0.7), 1e-8);
    NormalizedConvergenceReport rough = normalized_convergence_check(c, rough0, 1e-5);
    CHECK(rough.pass);
    // The limit forgets the initial current.
    CHECK(linf_distance(smooth.state.phi, rough.state.phi) < 1e-5);

    CHECK_THROWS_AS(normalized_convergence_check(c, zero_field(c.grid), 1e-14), NotConverged);
}

TEST_CASE("running past class extinction underflows the step size") {
    FlowConfig c = flat_config(32);
    // A bare zero drains the class mass at rate 2 pi, so the flow only exists
    // to t = 1/(2 pi); asking for t_end past that must fail, and the failure
    // surfaces as the step size collapsing rather than a wrong answer.
    c.bigF.zeros.push_back({0.25, 0.25, 1.0});
    c.t_end = 0.3;
    CHECK_THROWS_AS(run_flow(c, zero_field(c.grid)), MinStepUnderflow);
}

TEST_CASE("stencil-Laplacian evolution cross-validates the spectral one") {
    FlowConfig c = flat_config(64);
    c.g0 = cosine_spec(0.2, 1, 0);
    c.t_end = 0.5;
    FlowState spectral = run_flow(c, zero_field(c.grid));
    c.use_fd_laplacian = true;
    FlowState stencil = run_flow(c, zero_field(c.grid));
    double d = linf_distance(spectral.phi, stencil.phi);
    CHECK(d < 5e-3);  // second-order discretization gap at n = 64
    CHECK(d > 0.0);
}

TEST_CASE("identical configs reproduce bitwise identical runs") {
    FlowConfig c = flat_config(32);
    c.g0 = cosine_spec(0.25, 1, 1);
    c.bigF.poles.push_back({0.5, 0.5, 0.4});
    c.t_end = 0.3;
    ScalarField phi0 = rough_initial_potential(c.grid, c.g0, c.bigF, 1e-8);
    FlowState a = run_flow(c, phi0);
    FlowState b = run_flow(c, phi0);
    REQUIRE(a.monitors.samples.size() == b.monitors.samples.size());
    CHECK(a.phi.values == b.phi.values);
    for (size_t k = 0; k < a.monitors.samples.size(); ++k) {
        CHECK(a.monitors.samples[k].t == b.monitors.samples[k].t);
        CHECK(a.monitors.samples[k].class_mass == b.monitors.samples[k].class_mass);
        CHECK(a.monitors.samples[k].volume_ratio_min == b.monitors.samples[k].volume_ratio_min);
        CHECK(a.monitors.samples[k].scalar_curvature_inf_norm ==
              b.monitors.samples[k].scalar_curvature_inf_norm);
    }
}

TEST_CASE("mollified starts approach the rough potential monotonically") {
    PeriodicGrid g = make_grid(64);
    DensitySpec rough = pole_spec(0.6, 0.3, 0.7);
    ScalarField phi0 = rough_initial_potential(g, unit_spec(), rough, 1e-8);
    double prev = 1e100;
    for (int j : {4, 8, 16, 32}) {
        ScalarField pj = smooth_approximation_sequence(g, unit_spec(), rough, j, 1e-8);
        double err = linf_distance(pj, phi0);
        CHECK(err < prev);
        prev = err;
    }
    CHECK(prev < 0.02);

    DensitySpec smooth = cosine_spec(0.3, 2, 1);
    ScalarField exact = rough_initial_potential(g, unit_spec(), smooth, 1e-8);
    ScalarField lp = smooth_approximation_sequence(g, unit_spec(), smooth, 8, 1e-8);
    CHECK(linf_distance(lp, exact) < 1e-12);  // band-limited target passes through

    CHECK_THROWS_AS(smooth_approximation_sequence(g, unit_spec(), rough, 0, 1e-8), FlowError);
}

TEST_CASE("curvature monitor: flat zero, pole data finite on the smooth region") {
    FlowConfig flat = flat_config(32);
    FlowState st0 = make_initial_state(flat, zero_field(flat.grid));
    CHECK(scalar_curvature_monitor(st0, flat) < 1e-8);

    FlowConfig c = flat_config(64);
    c.bigF.poles.push_back({0.5, 0.5, 0.5});
    c.t_end = 0.15;
    ScalarField phi0 = rough_initial_potential(c.grid, c.g0, c.bigF, 1e-8);
    FlowState st = run_flow(c, phi0);
    double s = scalar_curvature_monitor(st, c);
    CHECK(std::isfinite(s));
    CHECK(s < 1e4);
    CHECK(st.monitors.samples.back().scalar_curvature_inf_norm == s);
}
