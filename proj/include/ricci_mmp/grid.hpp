#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ricci_mmp {

struct GridError : std::runtime_error {
    explicit GridError(const std::string& msg) : std::runtime_error(msg) {}
};
struct InvalidGridSize : GridError { using GridError::GridError; };

// Unit 2-torus [0,1)^2 sampled at cell centers (i+1/2)/n, so coordinate
// degeneracy points like (1/2,1/2) never coincide with a sample.
struct PeriodicGrid {
    int n = 0;
    double h() const { return 1.0 / n; }
    double coord(int i) const { return (i + 0.5) / n; }
    int points() const { return n * n; }
    bool operator==(const PeriodicGrid&) const = default;
};

PeriodicGrid make_grid(int n);  // power of two, n >= 16

struct ScalarField {
    PeriodicGrid grid;
    std::vector<double> values;  // row-major, values[iy * n + ix]

    double& at(int ix, int iy) { return values[size_t(iy) * grid.n + ix]; }
    double at(int ix, int iy) const { return values[size_t(iy) * grid.n + ix]; }
};

ScalarField constant_field(PeriodicGrid g, double c);

template <class F>
ScalarField tabulate(PeriodicGrid g, F&& f) {
    ScalarField out{g, std::vector<double>(size_t(g.points()))};
    for (int iy = 0; iy < g.n; ++iy)
        for (int ix = 0; ix < g.n; ++ix) out.at(ix, iy) = f(g.coord(ix), g.coord(iy));
    return out;
}

void require_same_grid(const ScalarField& a, const ScalarField& b);

// Deterministic sequential reductions (long double accumulators).
double field_integral(const ScalarField& f);  // over the unit torus
double field_mean(const ScalarField& f);
double field_min(const ScalarField& f);
double field_max(const ScalarField& f);
double sup_abs(const ScalarField& f);
double linf_distance(const ScalarField& a, const ScalarField& b);
double l1_distance(const ScalarField& a, const ScalarField& b);
double dot(const ScalarField& a, const ScalarField& b);  // plain sum, no h^2

void shift_in_place(ScalarField& f, double c);
void scale_in_place(ScalarField& f, double c);
void add_scaled(ScalarField& x, double alpha, const ScalarField& p);  // x += alpha p

// Spectral operators (FFT-based, exact on grid-resolvable Fourier modes; the
// Laplacian's zero mode vanishes identically, so it is exactly mean-free).
ScalarField spectral_laplacian(const ScalarField& f);
// Mean-zero u with lap u = rhs - mean(rhs).
ScalarField solve_poisson_mean_zero(const ScalarField& rhs);
// u = (a - b lap)^{-1} f for a > 0, b >= 0.
ScalarField inverse_helmholtz(const ScalarField& f, double a, double b);
// Zero every mode with max(|kx|,|ky|) > j.
ScalarField low_pass(const ScalarField& f, int j);

// 5-point second-order stencil, periodic wrap; used for cross-validation and
// for curvature monitors where spectral differentiation of non-smooth data
// would ring.
ScalarField fd_laplacian(const ScalarField& f);

// Preconditioned conjugate gradients for SPD operators on fields.
// Returns iterations used, or -1 if max_iter was hit before ||r||_inf <= tol.
template <class Op, class Pre>
int preconditioned_cg(const Op& apply, const Pre& precond, const ScalarField& b,
                      ScalarField& x, double tol, int max_iter) {
    ScalarField r = b;
    {
        ScalarField ax = apply(x);
        for (size_t i = 0; i < r.values.size(); ++i) r.values[i] -= ax.values[i];
    }
    if (sup_abs(r) <= tol) return 0;
    ScalarField z = precond(r);
    ScalarField p = z;
    double rz = dot(r, z);
    for (int it = 1; it <= max_iter; ++it) {
        ScalarField q = apply(p);
        double pq = dot(p, q);
        if (!(pq > 0)) return -1;  // loss of positivity: signal failure
        double alpha = rz / pq;
        add_scaled(x, alpha, p);
        add_scaled(r, -alpha, q);
        if (sup_abs(r) <= tol) return it;
        z = precond(r);
        double rz_next = dot(r, z);
        double beta = rz_next / rz;
        rz = rz_next;
        for (size_t i = 0; i < p.values.size(); ++i)
            p.values[i] = z.values[i] + beta * p.values[i];
    }
    return -1;
}

}  // namespace ricci_mmp
