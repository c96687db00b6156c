#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ricci_mmp/grid.hpp"

namespace ricci_mmp {

struct DensityError : std::runtime_error {
    explicit DensityError(const std::string& msg) : std::runtime_error(msg) {}
};
struct CoincidentZeroAndPole : DensityError { using DensityError::DensityError; };
struct InvalidDensitySpec : DensityError { using DensityError::DensityError; };

// a_cos*cos(2 pi (kx x + ky y)) + a_sin*sin(2 pi (kx x + ky y))
struct TrigMode {
    int kx = 0;
    int ky = 0;
    double a_cos = 0.0;
    double a_sin = 0.0;
};

struct SmoothPart {
    double constant = 1.0;
    std::vector<TrigMode> modes;
};

struct ZeroFactor {
    double x = 0.0, y = 0.0;
    double order = 0.0;  // a >= 0
};

struct PoleFactor {
    double x = 0.0, y = 0.0;
    double order = 0.0;  // b strictly inside (0,1): integrable, L^p for some p > 1
};

// Realized density: smooth_part * prod sigma(z; zero_i)^{a_i} * prod sigma(z; pole_j)^{-b_j}
// with sigma(z; z0) = sin^2(pi(x-x0)) + sin^2(pi(y-y0)).
struct DensitySpec {
    SmoothPart smooth;
    std::vector<ZeroFactor> zeros;
    std::vector<PoleFactor> poles;
};

void validate_density_spec(const DensitySpec& spec);  // throws on bad orders or coincidence

double sigma_value(double x, double y, double x0, double y0);
double torus_distance(double ax, double ay, double bx, double by);

ScalarField build_density(PeriodicGrid grid, const DensitySpec& spec);

// Pole-capped / zero-lifted family: smooth * (r + prod sigma^a) / (w + prod sigma^b).
// Reduces to build_density at w = r = 0.
ScalarField perturbed_density(PeriodicGrid grid, const DensitySpec& spec, double w, double r);

// chi = (1/2) lap log F, evaluated from closed forms (no discrete
// differentiation, so pole factors do not ring).
ScalarField chi_from_density(PeriodicGrid grid, const DensitySpec& spec);

std::vector<std::pair<double, double>> degeneracy_points(const DensitySpec& spec);

// mask[iy*n+ix] = 1 where the cell center is at torus distance >= radius from
// every listed point.
std::vector<unsigned char> smooth_region_mask(PeriodicGrid grid,
                                              const std::vector<std::pair<double, double>>& points,
                                              double radius);

double masked_sup_abs(const ScalarField& f, const std::vector<unsigned char>& mask);
double masked_linf_distance(const ScalarField& a, const ScalarField& b,
                            const std::vector<unsigned char>& mask);

}  // namespace ricci_mmp
