#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ricci_mmp/grid.hpp"

namespace ricci_mmp {

struct EllipticError : std::runtime_error {
    explicit EllipticError(const std::string& msg) : std::runtime_error(msg) {}
};
struct ZeroMassF : EllipticError { using EllipticError::EllipticError; };
struct NewtonDiverged : EllipticError { using EllipticError::EllipticError; };
struct NonpositiveDensityAtSolution : EllipticError { using EllipticError::EllipticError; };

struct EllipticSolution {
    ScalarField phi;
    // Linear problem: mass normalization c = mean(g0)/mean(F) and mean(phi) = 0.
    // Semilinear problem: the e^phi term fixes the constant, so phi carries its
    // own mean and c is 0.
    double c = 0.0;
    double residual = 0.0;  // sup-norm of the discrete equation
    int iterations = 0;
    double min_density = 0.0;  // min of (background + half-Laplacian) at the solution
    bool positive = false;     // min_density nonnegative up to roundoff slack
};

// g0 + (1/2) lap phi = c F, c = mean(g0)/mean(F); direct spectral inversion.
// Positivity of the solved density is reported, not enforced (F may dip
// negative for experiment inputs; with nonnegative F it holds by construction).
EllipticSolution solve_linear_ma(const ScalarField& g0, const ScalarField& F, double tol);

// chi + (1/2) lap phi = e^phi F via damped Newton from the constant
// log(mean(chi)/mean(F)).
EllipticSolution solve_semilinear_ma(const ScalarField& chi, const ScalarField& F, double tol);

struct StabilityPairResult {
    int pair_id = 0;
    double l1 = 0.0;    // ||f - g||_1 after mean matching
    double linf = 0.0;  // ||phi - psi||_inf under the symmetric max normalization
    double ratio = 0.0;
    bool skipped = false;  // f = g: 0/0 convention
};

struct StabilityReport {
    double exponent = 0.0;  // 1/(4 + epsilon)
    double fitted_c = 0.0;  // max ratio over non-skipped pairs
    std::vector<StabilityPairResult> pairs;
};

// For each (f, g): rescale g to f's mean, solve both linear problems against
// g0, normalize the difference so max(phi-psi) = max(psi-phi), and report
// ||phi-psi||_inf / ||f-g||_1^(1/(4+epsilon)).
StabilityReport stability_experiment(const ScalarField& g0,
                                     const std::vector<std::pair<ScalarField, ScalarField>>& pairs,
                                     double epsilon);

}  // namespace ricci_mmp
