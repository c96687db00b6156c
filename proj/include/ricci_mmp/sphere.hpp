#pragma once

#include <vector>

#include "ricci_mmp/flow.hpp"

namespace ricci_mmp {

// Axisymmetric conformal flow on the round 2-sphere. Latitudes are staggered
// away from both poles, theta_k = (k + 1/2) pi / m, so the sin(theta)-weighted
// flux Laplacian closes with exactly zero flux at theta = 0 and pi.
struct LatitudeGrid {
    int m = 0;
    double dtheta() const { return M_PI / m; }
    double theta(int k) const { return (k + 0.5) * M_PI / m; }
    bool operator==(const LatitudeGrid&) const = default;
};

// Throws FlowError unless m >= 32.
LatitudeGrid make_latitude_grid(int m);

// Metric v * g_round sampled per latitude; v > 0.
struct ConformalState {
    double t = 0.0;
    std::vector<double> v;
};

// Evaluates sum_j coeffs[j] * cos(j * theta) at the grid latitudes.
// Throws FlowError if the profile is not strictly positive there.
std::vector<double> profile_from_cosines(const LatitudeGrid& grid, const std::vector<double>& coeffs);

// (1/sin theta) d/dtheta (sin theta d/dtheta f), flux form with zero-flux
// closure at the poles; its area integral vanishes to rounding.
std::vector<double> round_laplacian(const LatitudeGrid& grid, const std::vector<double>& f);

// Area integral of f against the round area element 2 pi sin(theta) dtheta.
double sphere_quadrature(const LatitudeGrid& grid, const std::vector<double>& f);

// Area of the metric v * g_round.
double sphere_area(const LatitudeGrid& grid, const std::vector<double>& v);

// Gauss curvature K = (1 - lap(log v)/2) / v of the conformal metric.
// Requires v > 0 everywhere (FlowError).
std::vector<double> gauss_curvature(const LatitudeGrid& grid, const std::vector<double>& v);

// |integral of K over the metric area - 4 pi| / 4 pi.
double gauss_bonnet_residual(const LatitudeGrid& grid, const std::vector<double>& v);

// One implicit Euler step of dv/dt = -K v = -(1 - lap(log v)/2), solved for
// u = log v+ so positivity is built in. Throws StepRejected when the stage
// equation has no solution (the area has run out at this step size).
ConformalState step_unnormalized(const LatitudeGrid& grid, const ConformalState& state, double dt);

// Same stage solve for dv/dt = -K v + c v. The weight c is the measured mean
// curvature of the current state, which equals 1/T0 while the area stays at
// its initial value and holds the discrete flow on that manifold; freezing
// c = 1/T0 would let quadrature error excite the unstable area mode (rate
// 1/T0) and collapse long runs. Stationary exactly on constant data.
// Requires dt small enough that 1 - dt c stays positive.
ConformalState step_normalized_fano(const LatitudeGrid& grid, const ConformalState& state,
                                    double T0, double dt);

enum class SphereMode { Unnormalized, NormalizedFano };

struct SphereConfig {
    SphereMode mode = SphereMode::Unnormalized;
    int m = 128;
    std::vector<double> v0_cos = {1.0};  // cosine-series profile, index = frequency
    double t_end = 1.0;
    double T0 = 0.0;  // normalized mode; 0 means use the cohomological A0 / 4 pi
    double newton_tol = 1e-11;
    double dt_init = 0.01;
    double dt_min = 1e-8;
    double dt_max = 0.05;
};

struct SphereMonitorSample {
    double t = 0.0;
    double area = 0.0;
    double min_v = 0.0;
    double max_v = 0.0;
    double max_abs_k = 0.0;
    double gauss_bonnet_residual = 0.0;
};

struct SphereMonitorLog {
    std::vector<SphereMonitorSample> samples;
};

struct SphereRunResult {
    ConformalState state;
    SphereMonitorLog monitors;
};

// Adaptive drive to t_end (same controller contract as the torus flow):
// monitors at t = 0 and every accepted step, halve dt on rejection, throw
// MinStepUnderflow below dt_min.
SphereRunResult run_sphere_flow(const SphereConfig& config);

struct ExtinctionReport {
    double a0 = 0.0;              // initial area
    double t0_cohomological = 0.0;  // a0 / 4 pi
    double t_measured = 0.0;        // zero crossing of the fitted area line
    double rel_error = 0.0;
    bool pass = false;  // rel_error within 2%
    SphereMonitorLog monitors;
};

// Runs the unnormalized flow until min v < vanish_tol, then least-squares
// fits A(t) and extrapolates to zero; the area line is the faithful
// observable near extinction, where min v itself is numerically delicate.
// The config's mode and t_end are ignored.
ExtinctionReport extinction_experiment(const SphereConfig& config, double vanish_tol);

}  // namespace ricci_mmp
