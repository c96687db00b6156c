#include "ricci_mmp/grid.hpp"

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>

namespace ricci_mmp {

PeriodicGrid make_grid(int n) {
    if (n < 16 || (n & (n - 1)) != 0)
        throw InvalidGridSize("grid size must be a power of two, at least 16");
    return PeriodicGrid{n};
}

ScalarField constant_field(PeriodicGrid g, double c) {
    return ScalarField{g, std::vector<double>(size_t(g.points()), c)};
}

void require_same_grid(const ScalarField& a, const ScalarField& b) {
    if (!(a.grid == b.grid)) throw GridError("fields live on different grids");
}

double field_integral(const ScalarField& f) {
    long double acc = 0;
    for (double v : f.values) acc += v;
    long double h = 1.0L / f.grid.n;
    return double(acc * h * h);
}

double field_mean(const ScalarField& f) { return field_integral(f); }

double field_min(const ScalarField& f) {
    double m = f.values[0];
    for (double v : f.values) m = std::min(m, v);
    return m;
}

double field_max(const ScalarField& f) {
    double m = f.values[0];
    for (double v : f.values) m = std::max(m, v);
    return m;
}

double sup_abs(const ScalarField& f) {
    double m = 0;
    for (double v : f.values) m = std::max(m, std::abs(v));
    return m;
}

double linf_distance(const ScalarField& a, const ScalarField& b) {
    require_same_grid(a, b);
    double m = 0;
    for (size_t i = 0; i < a.values.size(); ++i)
        m = std::max(m, std::abs(a.values[i] - b.values[i]));
    return m;
}

double l1_distance(const ScalarField& a, const ScalarField& b) {
    require_same_grid(a, b);
    long double acc = 0;
    for (size_t i = 0; i < a.values.size(); ++i) acc += std::abs(a.values[i] - b.values[i]);
    long double h = 1.0L / a.grid.n;
    return double(acc * h * h);
}

double dot(const ScalarField& a, const ScalarField& b) {
    require_same_grid(a, b);
    long double acc = 0;
    for (size_t i = 0; i < a.values.size(); ++i)
        acc += (long double)a.values[i] * b.values[i];
    return double(acc);
}

void shift_in_place(ScalarField& f, double c) {
    for (double& v : f.values) v += c;
}

void scale_in_place(ScalarField& f, double c) {
    for (double& v : f.values) v *= c;
}

void add_scaled(ScalarField& x, double alpha, const ScalarField& p) {
    require_same_grid(x, p);
    for (size_t i = 0; i < x.values.size(); ++i) x.values[i] += alpha * p.values[i];
}

namespace {

// Per-thread FFTW workspace per grid size. Plan creation is not thread-safe
// and is serialized by a global mutex; execution uses thread-local buffers.
struct FftWorkspace {
    int n = 0;
    fftw_complex* buf = nullptr;
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;

    explicit FftWorkspace(int n_) : n(n_) {
        static std::mutex plan_mutex;
        buf = fftw_alloc_complex(size_t(n) * n);
        std::lock_guard<std::mutex> lock(plan_mutex);
        fwd = fftw_plan_dft_2d(n, n, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd = fftw_plan_dft_2d(n, n, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~FftWorkspace() {
        static std::mutex plan_mutex;
        std::lock_guard<std::mutex> lock(plan_mutex);
        if (fwd) fftw_destroy_plan(fwd);
        if (bwd) fftw_destroy_plan(bwd);
        fftw_free(buf);
    }
    FftWorkspace(const FftWorkspace&) = delete;
    FftWorkspace& operator=(const FftWorkspace&) = delete;
};

FftWorkspace& workspace_for(int n) {
    thread_local std::map<int, FftWorkspace> cache;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(std::piecewise_construct,
                                              std::forward_as_tuple(n),
                                              std::forward_as_tuple(n)).first;
    return it->second;
}

int signed_freq(int k, int n) { return k < n / 2 ? k : k - n; }

// Apply a real multiplier m(kx, ky) in frequency space.
template <class M>
ScalarField apply_multiplier(const ScalarField& f, M&& mult) {
    int n = f.grid.n;
    FftWorkspace& ws = workspace_for(n);
    for (int i = 0; i < n * n; ++i) {
        ws.buf[i][0] = f.values[size_t(i)];
        ws.buf[i][1] = 0.0;
    }
    fftw_execute(ws.fwd);
    for (int ky = 0; ky < n; ++ky) {
        for (int kx = 0; kx < n; ++kx) {
            double m = mult(signed_freq(kx, n), signed_freq(ky, n));
            fftw_complex& c = ws.buf[size_t(ky) * n + kx];
            c[0] *= m;
            c[1] *= m;
        }
    }
    fftw_execute(ws.bwd);
    ScalarField out{f.grid, std::vector<double>(f.values.size())};
    double norm = 1.0 / (double(n) * n);
    for (int i = 0; i < n * n; ++i) out.values[size_t(i)] = ws.buf[i][0] * norm;
    return out;
}

constexpr double kTwoPiSq = 4.0 * M_PI * M_PI;

}  // namespace

ScalarField spectral_laplacian(const ScalarField& f) {
    return apply_multiplier(f, [](int kx, int ky) {
        return -kTwoPiSq * (double(kx) * kx + double(ky) * ky);
    });
}

ScalarField solve_poisson_mean_zero(const ScalarField& rhs) {
    return apply_multiplier(rhs, [](int kx, int ky) {
        double k2 = double(kx) * kx + double(ky) * ky;
        return k2 == 0 ? 0.0 : -1.0 / (kTwoPiSq * k2);
    });
}

ScalarField inverse_helmholtz(const ScalarField& f, double a, double b) {
    if (!(a > 0) || !(b >= 0)) throw GridError("inverse_helmholtz needs a > 0, b >= 0");
    return apply_multiplier(f, [a, b](int kx, int ky) {
        double k2 = double(kx) * kx + double(ky) * ky;
        return 1.0 / (a + b * kTwoPiSq * k2);
    });
}

ScalarField low_pass(const ScalarField& f, int j) {
    if (j < 0) throw GridError("low_pass cutoff must be nonnegative");
    return apply_multiplier(f, [j](int kx, int ky) {
        return std::max(std::abs(kx), std::abs(ky)) <= j ? 1.0 : 0.0;
    });
}

ScalarField fd_laplacian(const ScalarField& f) {
    int n = f.grid.n;
    double inv_h2 = double(n) * n;
    ScalarField out{f.grid, std::vector<double>(f.values.size())};
    for (int iy = 0; iy < n; ++iy) {
        int ym = (iy + n - 1) % n, yp = (iy + 1) % n;
        for (int ix = 0; ix < n; ++ix) {
            int xm = (ix + n - 1) % n, xp = (ix + 1) % n;
            out.at(ix, iy) = (f.at(xm, iy) + f.at(xp, iy) + f.at(ix, ym) + f.at(ix, yp) -
                              4.0 * f.at(ix, iy)) *
                             inv_h2;
        }
    }
    return out;
}

}  // namespace ricci_mmp
