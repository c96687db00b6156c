#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ricci_mmp/density.hpp"
#include "ricci_mmp/grid.hpp"

namespace ricci_mmp {

struct FlowError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// One implicit step could not be completed at the requested dt; the driver
// halves dt and retries.
struct StepRejected : FlowError {
    using FlowError::FlowError;
};
struct MinStepUnderflow : FlowError {
    using FlowError::FlowError;
};
struct InsufficientSamples : FlowError {
    using FlowError::FlowError;
};
struct NotConverged : FlowError {
    double final_gap;
    explicit NotConverged(double gap)
        : FlowError("flow did not reach the fixed point, final gap " + std::to_string(gap)),
          final_gap(gap) {}
};

enum class FlowMode { Unnormalized, Normalized };
enum class ChiMode { FromF, Prescribed };

struct PerturbationParams {
    double s = 0.0;      // background bump: adds s to the reference density
    double w = 0.0;      // pole cap in the perturbed volume density
    double r = 0.0;      // zero lift in the perturbed volume density
    double delta = 0.0;  // class shrink: initial density scaled by (1 - delta)
};

struct FlowConfig {
    FlowMode mode = FlowMode::Unnormalized;
    PeriodicGrid grid;
    DensitySpec g0;    // initial metric density
    DensitySpec bigF;  // volume density
    ChiMode chi_mode = ChiMode::FromF;
    // Required iff chi_mode == Prescribed; must be positive on the grid.
    std::optional<ScalarField> prescribed_chi;
    double t_end = 1.0;
    double newton_tol = 1e-11;  // implicit-stage residual target
    double step_tol = 1e-4;     // discretization budget; checks allow 10x this
    double dt_init = 0.01;
    double dt_min = 1e-8;
    double dt_max = 0.05;
    // Cross-validation switch: evolve with the 2nd-order stencil Laplacian
    // instead of the spectral one.
    bool use_fd_laplacian = false;
    PerturbationParams perturbation;
};

struct MonitorSample {
    double t;
    double volume_ratio_min;  // min over the grid of (g_t + lap(phi)/2) / F
    double volume_ratio_max;
    double class_mass;  // integral of the evolving metric density
    double phi_inf_norm;
    double phi_dot_inf_norm;
    double phi_dot_sup;  // signed max, for the one-sided decay envelope
    double phi_dot_l1;
    double scalar_curvature_inf_norm;  // away from degeneracy points
    double fixed_point_gap;            // sup |chi + lap(phi)/2 - e^phi F|
};

struct MonitorLog {
    std::vector<MonitorSample> samples;
};

struct FlowState {
    double t = 0.0;
    ScalarField phi;
    ScalarField phi_dot;  // rate at the last accepted time
    MonitorLog monitors;
};

// Bounded potential whose metric density is a rescaled rough target: the
// solution of the linear mass-prescription problem for (g0, target).
ScalarField rough_initial_potential(PeriodicGrid grid, const DensitySpec& g0,
                                    const DensitySpec& target, double tol);

// Same, but from the target density low-passed at mode j, clipped positive and
// mass-renormalized. Approaches rough_initial_potential as j grows.
ScalarField smooth_approximation_sequence(PeriodicGrid grid, const DensitySpec& g0,
                                          const DensitySpec& target, int j, double tol);

// State at t = 0 with the rate field evaluated and the first monitor sample
// recorded. Throws FlowError if the initial metric density is not positive
// away from the declared degeneracy points.
FlowState make_initial_state(const FlowConfig& config, ScalarField phi0);

// One implicit Euler step of size dt solved by damped Newton on the stage
// rate, a form whose metric density is positive by construction even near
// degeneracy. Positivity of the realized density at every node farther than
// one grid spacing from the declared degeneracy points is an acceptance
// condition for the step. Appends no monitors.
FlowState step(const FlowState& state, const FlowConfig& config, double dt);

// Adaptive drive to t_end: halve dt on rejection (MinStepUnderflow below
// dt_min), grow by 1.2x after 5 consecutive accepts, dt capped by dt_max.
// Monitors are recorded at t = 0 and at every accepted step.
FlowState run_flow(const FlowConfig& config, const ScalarField& phi0);

MonitorSample compute_monitor_sample(const FlowState& state, const FlowConfig& config);

// Sup over grid points at distance >= 0.1 from every declared degeneracy
// point of |(lap log G)/G|, G the evolving metric density (stencil Laplacian:
// the monitor stays local so singular data cannot pollute it globally).
double scalar_curvature_monitor(const FlowState& state, const FlowConfig& config);

struct VolumeBandReport {
    double c;             // smallest C with e^{-C/t} <= ratio_min, ratio_max <= e^{C/t}
    double c_small_time;  // smallest C with ratio_min >= t/C on (0, t_small]
    int samples_used;
};
// Fits the band constants over logged samples with t >= t_min (at least two
// required, else InsufficientSamples).
VolumeBandReport volume_band_check(const MonitorLog& log, double t_min, double t_small = 0.5);

struct ComparisonReport {
    bool pass;
    double max_order_violation;  // max over time and nodes of (phi_low - phi_high)
    double max_gap_increase;     // worst growth of sup(phi_high - phi_low) between steps
    std::vector<double> times;
    std::vector<double> sup_gaps;
    FlowState low;
    FlowState high;
};
// Runs both initial potentials under one shared adaptive stepper so states are
// comparable at identical times. Passes iff ordering holds to 10 * step_tol
// and the sup-gap never grows beyond roundoff.
ComparisonReport comparison_check(FlowConfig config, const ScalarField& phi0_low,
                                  const ScalarField& phi0_high, double t_end);

struct PerturbationRun {
    PerturbationParams params;
    std::vector<ScalarField> phi_at_samples;
    // Sup distance to the unperturbed member on the region >= 0.1 from
    // degeneracy points, one entry per sample time; empty if the grid of
    // parameters contains no (s,w,r) = 0 member.
    std::vector<double> masked_gap_to_reference;
};
struct PerturbationReport {
    std::vector<double> sample_times;
    std::vector<PerturbationRun> runs;
    // Worst wrong-direction excess over sample times, whole grid and the
    // smooth region separately. Directions: phi decreasing in r, increasing
    // in w, increasing in s.
    double max_r_violation, max_w_violation, max_s_violation;
    double masked_r_violation, masked_w_violation, masked_s_violation;
    bool monotone;  // masked violations all within 10 * step_tol
};
// Integrates one flow per parameter triple from phi0 = 0 under a shared
// stepper and compares members that differ in exactly one coordinate.
PerturbationReport perturbation_monotonicity_check(const FlowConfig& config,
                                                   const std::vector<PerturbationParams>& param_grid,
                                                   const std::vector<double>& sample_times);

struct NormalizedConvergenceReport {
    double final_gap;  // sup |phi(t_end) - phi_limit|
    double fitted_c;   // envelope constant for sup phi_dot <= C t e^{-t}, fitted on [1, 5]
    bool envelope_ok;  // envelope holds on all of [1, t_end] with 5% slack
    bool l1_monotone;  // |phi_dot|_L1 non-increasing on [1, t_end]
    double l1_final;
    bool pass;
    ScalarField phi_limit;  // solution of the fixed-point equation chi + lap/2 = e^phi F
    FlowState state;
};
// Normalized mode with prescribed positive chi only. Throws NotConverged when
// the final gap exceeds tol.
NormalizedConvergenceReport normalized_convergence_check(const FlowConfig& config,
                                                         const ScalarField& phi0, double tol);

}  // namespace ricci_mmp
