#include "ricci_mmp/elliptic.hpp"

#include <algorithm>
#include <cmath>

namespace ricci_mmp {

namespace {

double positivity_slack(const ScalarField& reference) {
    return 1e-10 * (1.0 + sup_abs(reference));
}

}  // namespace

EllipticSolution solve_linear_ma(const ScalarField& g0, const ScalarField& F, double tol) {
    require_same_grid(g0, F);
    if (!(tol > 0)) throw EllipticError("tolerance must be positive");
    double mf = field_mean(F);
    if (!(mf > 0)) throw ZeroMassF("F has nonpositive mass");
    double c = field_mean(g0) / mf;

    // lap phi = 2(cF - g0); the right-hand side has zero mean by the choice of
    // c, so the mean-zero Poisson inversion solves the equation itself.
    ScalarField rhs = F;
    for (size_t i = 0; i < rhs.values.size(); ++i)
        rhs.values[i] = 2.0 * (c * F.values[i] - g0.values[i]);
    EllipticSolution sol;
    sol.phi = solve_poisson_mean_zero(rhs);
    sol.c = c;
    sol.iterations = 1;

    ScalarField lap = spectral_laplacian(sol.phi);
    double resid = 0.0, dmin = g0.values[0] + 0.5 * lap.values[0];
    for (size_t i = 0; i < lap.values.size(); ++i) {
        double density = g0.values[i] + 0.5 * lap.values[i];
        resid = std::max(resid, std::abs(density - c * F.values[i]));
        dmin = std::min(dmin, density);
    }
    sol.residual = resid;
    sol.min_density = dmin;
    sol.positive = dmin >= -positivity_slack(g0);
    if (resid > tol)
        throw EllipticError("spectral residual exceeds the requested tolerance");
    return sol;
}

EllipticSolution solve_semilinear_ma(const ScalarField& chi, const ScalarField& F, double tol) {
    require_same_grid(chi, F);
    if (!(tol > 0)) throw EllipticError("tolerance must be positive");
    double mchi = field_mean(chi), mf = field_mean(F);
    if (!(mf > 0)) throw ZeroMassF("F has nonpositive mass");
    if (!(mchi > 0)) throw EllipticError("chi must have positive mass");

    PeriodicGrid g = chi.grid;
    ScalarField phi = constant_field(g, std::log(mchi / mf));

    auto residual_field = [&](const ScalarField& p) {
        ScalarField r = spectral_laplacian(p);
        for (size_t i = 0; i < r.values.size(); ++i)
            r.values[i] = chi.values[i] + 0.5 * r.values[i] -
                          std::exp(p.values[i]) * F.values[i];
        return r;
    };

    ScalarField r = residual_field(phi);
    double rnorm = sup_abs(r);
    int newton_it = 0;
    const int max_newton = 100;
    while (rnorm > tol) {
        if (++newton_it > max_newton)
            throw NewtonDiverged("Newton iteration limit reached");
        // Solve (-1/2 lap + e^phi F) delta = r; SPD since e^phi F > 0.
        ScalarField weight = phi;
        for (size_t i = 0; i < weight.values.size(); ++i)
            weight.values[i] = std::exp(phi.values[i]) * F.values[i];
        double wbar = std::max(field_mean(weight), 1e-12);
        auto apply = [&](const ScalarField& u) {
            ScalarField out = spectral_laplacian(u);
            for (size_t i = 0; i < out.values.size(); ++i)
                out.values[i] = -0.5 * out.values[i] + weight.values[i] * u.values[i];
            return out;
        };
        auto precond = [&](const ScalarField& v) { return inverse_helmholtz(v, wbar, 0.5); };
        ScalarField delta = constant_field(g, 0.0);
        int cg = preconditioned_cg(apply, precond, r, delta, std::min(tol, rnorm) * 1e-3, 400);
        if (cg < 0) throw NewtonDiverged("inner linear solve failed to converge");

        double lambda = 1.0;
        bool accepted = false;
        for (int halving = 0; halving <= 30; ++halving) {
            ScalarField trial = phi;
            add_scaled(trial, lambda, delta);
            ScalarField rt = residual_field(trial);
            double rtn = sup_abs(rt);
            if (rtn < rnorm) {
                phi = std::move(trial);
                r = std::move(rt);
                rnorm = rtn;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!accepted) throw NewtonDiverged("step damping exhausted");
    }

    EllipticSolution sol;
    sol.phi = std::move(phi);
    sol.c = 0.0;
    sol.residual = rnorm;
    sol.iterations = newton_it;
    ScalarField lap = spectral_laplacian(sol.phi);
    double dmin = chi.values[0] + 0.5 * lap.values[0];
    for (size_t i = 0; i < lap.values.size(); ++i)
        dmin = std::min(dmin, chi.values[i] + 0.5 * lap.values[i]);
    sol.min_density = dmin;
    sol.positive = dmin > 0;
    if (!(dmin > 0))
        throw NonpositiveDensityAtSolution("metric density is not positive at the solution");
    return sol;
}

StabilityReport stability_experiment(const ScalarField& g0,
                                     const std::vector<std::pair<ScalarField, ScalarField>>& pairs,
                                     double epsilon) {
    if (!(epsilon >= 0)) throw EllipticError("epsilon must be nonnegative");
    StabilityReport report;
    report.exponent = 1.0 / (4.0 + epsilon);
    int id = 0;
    for (const auto& [f_in, g_in] : pairs) {
        require_same_grid(g0, f_in);
        require_same_grid(g0, g_in);
        StabilityPairResult row;
        row.pair_id = id++;

        double mf = field_mean(f_in), mg = field_mean(g_in);
        if (!(mf > 0) || !(mg > 0)) throw ZeroMassF("stability pair with nonpositive mass");
        ScalarField g_scaled = g_in;
        scale_in_place(g_scaled, mf / mg);

        row.l1 = l1_distance(f_in, g_scaled);
        if (row.l1 < 1e-14) {
            row.skipped = true;  // f = g: the quotient is 0/0
            report.pairs.push_back(row);
            continue;
        }

        ScalarField phi = solve_linear_ma(g0, f_in, 1e-8).phi;
        ScalarField psi = solve_linear_ma(g0, g_scaled, 1e-8).phi;
        double dmax = phi.values[0] - psi.values[0], dmin = dmax;
        for (size_t i = 0; i < phi.values.size(); ++i) {
            double d = phi.values[i] - psi.values[i];
            dmax = std::max(dmax, d);
            dmin = std::min(dmin, d);
        }
        // Shift so max(phi-psi) = max(psi-phi); the sup norm is then half the
        // oscillation.
        row.linf = 0.5 * (dmax - dmin);
        row.ratio = row.linf / std::pow(row.l1, report.exponent);
        report.fitted_c = std::max(report.fitted_c, row.ratio);
        report.pairs.push_back(row);
    }
    return report;
}

}  // namespace ricci_mmp
