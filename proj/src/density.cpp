#include "ricci_mmp/density.hpp"

#include <cmath>

namespace ricci_mmp {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

struct SmoothEval {
    double value, dx, dy, lap;
};

SmoothEval eval_smooth(const SmoothPart& s, double x, double y) {
    SmoothEval e{s.constant, 0.0, 0.0, 0.0};
    for (const TrigMode& m : s.modes) {
        double u = kTwoPi * (m.kx * x + m.ky * y);
        double c = std::cos(u), sn = std::sin(u);
        double term = m.a_cos * c + m.a_sin * sn;
        double dterm = -m.a_cos * sn + m.a_sin * c;  // derivative in u
        e.value += term;
        e.dx += kTwoPi * m.kx * dterm;
        e.dy += kTwoPi * m.ky * dterm;
        e.lap += -kTwoPi * kTwoPi * (double(m.kx) * m.kx + double(m.ky) * m.ky) * term;
    }
    return e;
}

struct SigmaEval {
    double value, dx, dy, lap;
};

SigmaEval eval_sigma(double x, double y, double x0, double y0) {
    double xi = x - x0, eta = y - y0;
    double sx = std::sin(M_PI * xi), sy = std::sin(M_PI * eta);
    SigmaEval e;
    e.value = sx * sx + sy * sy;
    e.dx = M_PI * std::sin(kTwoPi * xi);
    e.dy = M_PI * std::sin(kTwoPi * eta);
    e.lap = 2.0 * M_PI * M_PI * (std::cos(kTwoPi * xi) + std::cos(kTwoPi * eta));
    return e;
}

double lap_log_sigma(double x, double y, double x0, double y0) {
    SigmaEval e = eval_sigma(x, y, x0, y0);
    return e.lap / e.value - (e.dx * e.dx + e.dy * e.dy) / (e.value * e.value);
}

}  // namespace

void validate_density_spec(const DensitySpec& spec) {
    for (const ZeroFactor& z : spec.zeros)
        if (!(z.order >= 0)) throw InvalidDensitySpec("zero order must be >= 0");
    for (const PoleFactor& p : spec.poles)
        if (!(p.order > 0 && p.order < 1))
            throw InvalidDensitySpec("pole order must lie strictly inside (0,1)");
    for (const ZeroFactor& z : spec.zeros)
        for (const PoleFactor& p : spec.poles)
            if (torus_distance(z.x, z.y, p.x, p.y) < 1e-9)
                throw CoincidentZeroAndPole("zero and pole share a location");
}

double sigma_value(double x, double y, double x0, double y0) {
    return eval_sigma(x, y, x0, y0).value;
}

double torus_distance(double ax, double ay, double bx, double by) {
    double dx = std::abs(ax - bx);
    dx -= std::floor(dx);
    dx = std::min(dx, 1.0 - dx);
    double dy = std::abs(ay - by);
    dy -= std::floor(dy);
    dy = std::min(dy, 1.0 - dy);
    return std::hypot(dx, dy);
}

ScalarField perturbed_density(PeriodicGrid grid, const DensitySpec& spec, double w, double r) {
    validate_density_spec(spec);
    if (!(w >= 0) || !(r >= 0)) throw InvalidDensitySpec("perturbation caps must be >= 0");
    ScalarField out = tabulate(grid, [&](double x, double y) {
        double s = eval_smooth(spec.smooth, x, y).value;
        double zero_part = 1.0;
        for (const ZeroFactor& z : spec.zeros)
            zero_part *= std::pow(sigma_value(x, y, z.x, z.y), z.order);
        double pole_part = 1.0;
        for (const PoleFactor& p : spec.poles)
            pole_part *= std::pow(sigma_value(x, y, p.x, p.y), p.order);
        return s * (r + zero_part) / (w + pole_part);
    });
    for (double v : out.values)
        if (!std::isfinite(v) || !(v > 0))
            throw InvalidDensitySpec(
                "density is not finite and positive on the grid (nonpositive smooth part, or a "
                "degeneracy point on a grid node)");
    return out;
}

ScalarField build_density(PeriodicGrid grid, const DensitySpec& spec) {
    return perturbed_density(grid, spec, 0.0, 0.0);
}

ScalarField chi_from_density(PeriodicGrid grid, const DensitySpec& spec) {
    validate_density_spec(spec);
    ScalarField out = tabulate(grid, [&](double x, double y) {
        SmoothEval s = eval_smooth(spec.smooth, x, y);
        double acc = s.lap / s.value - (s.dx * s.dx + s.dy * s.dy) / (s.value * s.value);
        for (const ZeroFactor& z : spec.zeros) acc += z.order * lap_log_sigma(x, y, z.x, z.y);
        for (const PoleFactor& p : spec.poles) acc -= p.order * lap_log_sigma(x, y, p.x, p.y);
        return 0.5 * acc;
    });
    for (double v : out.values)
        if (!std::isfinite(v))
            throw InvalidDensitySpec("log-density curvature is not finite on the grid");
    return out;
}

std::vector<std::pair<double, double>> degeneracy_points(const DensitySpec& spec) {
    std::vector<std::pair<double, double>> pts;
    for (const ZeroFactor& z : spec.zeros) pts.emplace_back(z.x, z.y);
    for (const PoleFactor& p : spec.poles) pts.emplace_back(p.x, p.y);
    return pts;
}

std::vector<unsigned char> smooth_region_mask(PeriodicGrid grid,
                                              const std::vector<std::pair<double, double>>& points,
                                              double radius) {
    std::vector<unsigned char> mask(size_t(grid.points()), 1);
    for (int iy = 0; iy < grid.n; ++iy) {
        for (int ix = 0; ix < grid.n; ++ix) {
            double x = grid.coord(ix), y = grid.coord(iy);
            for (const auto& [px, py] : points) {
                if (torus_distance(x, y, px, py) < radius) {
                    mask[size_t(iy) * grid.n + ix] = 0;
                    break;
                }
            }
        }
    }
    return mask;
}

double masked_sup_abs(const ScalarField& f, const std::vector<unsigned char>& mask) {
    double m = 0;
    for (size_t i = 0; i < f.values.size(); ++i)
        if (mask[i]) m = std::max(m, std::abs(f.values[i]));
    return m;
}

double masked_linf_distance(const ScalarField& a, const ScalarField& b,
                            const std::vector<unsigned char>& mask) {
    require_same_grid(a, b);
    double m = 0;
    for (size_t i = 0; i < a.values.size(); ++i)
        if (mask[i]) m = std::max(m, std::abs(a.values[i] - b.values[i]));
    return m;
}

}  // namespace ricci_mmp
