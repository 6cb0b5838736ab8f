#include "isotropica/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#define LAPACK_COMPLEX_CUSTOM
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include "isotropica/errors.hpp"
#include "isotropica/parallel.hpp"

namespace isotropica {

namespace {

constexpr double pi = std::numbers::pi;

bool power_of_two(int m) { return m >= 1 && (m & (m - 1)) == 0; }

int next_power_of_two(double x) {
    int m = 4;
    while (double(m) < x && m < (1 << 30)) m *= 2;
    return m;
}

// positive half of the 32-point Gauss-Legendre rule on [-1, 1]
const double gl_x[16] = {
    0.0483076656877383162, 0.1444719615827964934, 0.2392873622521370745,
    0.3318686022821276497, 0.4213512761306353454, 0.5068999089322293900,
    0.5877157572407623290, 0.6630442669302152009, 0.7321821187402896804,
    0.7944837959679424069, 0.8493676137325699701, 0.8963211557660521239,
    0.9349060759377396891, 0.9647622555875064307, 0.9856115115452683354,
    0.9972638618494815635};
const double gl_w[16] = {
    0.0965400885147278006, 0.0956387200792748594, 0.0938443990808045654,
    0.0911738786957638847, 0.0876520930044038111, 0.0833119242269467552,
    0.0781938957870703065, 0.0723457941088485062, 0.0658222227763618468,
    0.0586840934785355471, 0.0509980592623761762, 0.0428358980222266807,
    0.0342738629130214331, 0.0253920653092620595, 0.0162743947309056706,
    0.0070186100094700966};

template <typename F>
double gl_panels(F&& f, double lo, double hi, int panels) {
    const double h = (hi - lo) / panels;
    std::vector<double> sums(static_cast<std::size_t>(panels));
    for (int p = 0; p < panels; ++p) {
        const double mid = lo + (p + 0.5) * h, half = 0.5 * h;
        double s = 0.0;
        for (int q = 0; q < 16; ++q)
            s += gl_w[q] * (f(mid + half * gl_x[q]) + f(mid - half * gl_x[q]));
        sums[static_cast<std::size_t>(p)] = s * half;
    }
    return pairwise_sum(sums.data(), sums.size());
}

// one axis of a trig potential: cosine/sine band coefficients by frequency
struct TrigAxis {
    double shift = 0.0;
    std::vector<double> a, b; // index d-1 holds the cos(dx)/sin(dx) weights
    int degree() const { return static_cast<int>(a.size()); }
    bool cos_only() const {
        for (double v : b)
            if (v != 0.0) return false;
        return true;
    }
};

TrigAxis trig_axis(const Potential& V, int axis, bool take_shift) {
    TrigAxis ax;
    if (take_shift) ax.shift = V.shift;
    for (const auto& mode : V.modes) {
        const int freq = mode.d[static_cast<std::size_t>(axis)];
        if (freq == 0) {
            // constant mode, or a mode living on the other axis
            bool constant = true;
            for (int v : mode.d) constant = constant && v == 0;
            if (constant && take_shift) ax.shift += mode.a;
            continue;
        }
        const int f = std::abs(freq);
        const double sgn = freq < 0 ? -1.0 : 1.0;
        if (static_cast<int>(ax.a.size()) < f) {
            ax.a.resize(static_cast<std::size_t>(f), 0.0);
            ax.b.resize(static_cast<std::size_t>(f), 0.0);
        }
        ax.a[static_cast<std::size_t>(f - 1)] += mode.a;
        ax.b[static_cast<std::size_t>(f - 1)] += sgn * mode.b;
    }
    return ax;
}

bool separable(const Potential& V) {
    for (const auto& mode : V.modes) {
        int active = 0;
        for (int v : mode.d) active += v != 0;
        if (active > 1) return false;
    }
    return true;
}

// all eigenvalues of the Fourier-Galerkin matrix of 1/2 hbar^2 d^2/dx^2 + V
// on modes m = -M/2 .. M/2-1 (period 2 pi)
std::vector<double> banded_axis_eigenvalues(const TrigAxis& ax, double hbar, int M) {
    const int D = ax.degree();
    std::vector<double> diag(static_cast<std::size_t>(M));
    for (int i = 0; i < M; ++i) {
        const double m = i - M / 2;
        diag[static_cast<std::size_t>(i)] = 0.5 * hbar * hbar * m * m + ax.shift;
    }
    if (D == 0) {
        std::sort(diag.begin(), diag.end());
        return diag;
    }
    std::vector<double> w(static_cast<std::size_t>(M));
    const int ld = D + 1;
    lapack_int info = 0;
    if (ax.cos_only()) {
        std::vector<double> ab(static_cast<std::size_t>(ld) * static_cast<std::size_t>(M), 0.0);
        for (int j = 0; j < M; ++j) {
            ab[static_cast<std::size_t>(j * ld)] = diag[static_cast<std::size_t>(j)];
            for (int d = 1; d <= D && j + d < M; ++d)
                ab[static_cast<std::size_t>(j * ld + d)] =
                    0.5 * ax.a[static_cast<std::size_t>(d - 1)];
        }
        info = LAPACKE_dsbevd(LAPACK_COL_MAJOR, 'N', 'L', M, D, ab.data(), ld,
                              w.data(), nullptr, 1);
    } else {
        std::vector<std::complex<double>> ab(
            static_cast<std::size_t>(ld) * static_cast<std::size_t>(M),
            std::complex<double>(0.0, 0.0));
        for (int j = 0; j < M; ++j) {
            ab[static_cast<std::size_t>(j * ld)] = diag[static_cast<std::size_t>(j)];
            for (int d = 1; d <= D && j + d < M; ++d)
                ab[static_cast<std::size_t>(j * ld + d)] =
                    std::complex<double>(0.5 * ax.a[static_cast<std::size_t>(d - 1)],
                                         -0.5 * ax.b[static_cast<std::size_t>(d - 1)]);
        }
        info = LAPACKE_zhbevd(LAPACK_COL_MAJOR, 'N', 'L', M, D, ab.data(), ld,
                              w.data(), nullptr, 1);
    }
    require_arg(info == 0, "banded eigensolver failed");
    return w;
}

// first column of the pseudospectral kinetic matrix on an M-point grid of
// period L (circulant; entry T_ij = col[(i-j) mod M])
std::vector<double> kinetic_column(double hbar, int M, double L) {
    std::vector<double> col(static_cast<std::size_t>(M), 0.0);
    const double base = 2.0 * pi / L;
    for (int r = 0; r < M; ++r) {
        double s = 0.0;
        for (int m = 1; m < M / 2; ++m) {
            const double k = base * m;
            s += hbar * hbar * k * k * std::cos(2.0 * pi * m * r / M);
        }
        const double knyq = base * (M / 2);
        s += 0.5 * hbar * hbar * knyq * knyq * (r % 2 == 0 ? 1.0 : -1.0);
        col[static_cast<std::size_t>(r)] = s / M;
    }
    return col;
}

struct DenseResult {
    std::vector<double> w;
    std::vector<double> z; // column-major eigenvectors, empty unless requested
};

DenseResult dense_eigensolve(std::vector<double>& A, int dim, bool vectors) {
    DenseResult r;
    r.w.resize(static_cast<std::size_t>(dim));
    const lapack_int info =
        LAPACKE_dsyevd(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'L', dim, A.data(),
                       dim, r.w.data());
    require_arg(info == 0, "dense eigensolver failed");
    if (vectors) r.z = std::move(A);
    return r;
}

GridSpec torus_grid_nd(int n, double L, int M) {
    std::vector<AxisSpec> axes;
    for (int a = 0; a < n; ++a) {
        AxisSpec ax;
        ax.lo = -L / 2.0;
        ax.hi = L / 2.0;
        ax.m = M;
        ax.periodic = true;
        axes.push_back(ax);
    }
    return GridSpec(std::move(axes));
}

void retain_window(const std::vector<double>& w, const DenseResult* dense, int dim,
                   double window, double cell, SpectrumResult& out) {
    for (std::size_t j = 0; j < w.size(); ++j) {
        if (std::abs(w[j]) > window) continue;
        out.eigenvalues.push_back(w[j]);
        if (dense && !dense->z.empty()) {
            std::vector<double> v(static_cast<std::size_t>(dim));
            const double s = 1.0 / std::sqrt(cell);
            for (int i = 0; i < dim; ++i)
                v[static_cast<std::size_t>(i)] =
                    dense->z[j * static_cast<std::size_t>(dim) +
                             static_cast<std::size_t>(i)] *
                    s;
            out.eigenvectors.push_back(std::move(v));
        }
    }
}

// least-squares slope of y against x with R^2
void fit_line(const std::vector<double>& x, const std::vector<double>& y,
              double& slope, double& r2) {
    const double n = double(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
        syy += y[i] * y[i];
    }
    const double vx = sxx - sx * sx / n, vy = syy - sy * sy / n;
    const double cxy = sxy - sx * sy / n;
    require_arg(vx > 0.0, "fit needs distinct hbar values");
    slope = cxy / vx;
    r2 = vy > 0.0 ? cxy * cxy / (vx * vy) : 1.0;
}

} // namespace

double SchrodingerProblem::nyquist() const {
    return hbar * (M / 2) * (2.0 * pi / period);
}

double SchrodingerProblem::momentum_requirement() const {
    const double vmin = V.min_value(period / 2.0);
    return std::sqrt(2.0 * std::max(0.0, window - vmin));
}

void SchrodingerProblem::validate() const {
    require_arg(n == 1 || n == 2, "torus dimension must be 1 or 2");
    require_arg(V.n == n, "potential dimension must match the torus");
    require_arg(hbar > 0.0, "hbar must be positive");
    require_arg(window > 0.0, "window must be positive");
    require_arg(period > 0.0, "period must be positive");
    require_arg(M >= 4 && power_of_two(M), "M must be a power of two (>= 4)");
    if (V.kind == Potential::Kind::trig)
        require_arg(std::abs(period - 2.0 * pi) < 1e-12,
                    "trig potentials live on the 2 pi torus");

    const double need = momentum_requirement() + 2.0;
    if (nyquist() < need) {
        const int m_min =
            next_power_of_two(2.0 * need / (hbar * 2.0 * pi / period));
        throw guard_error("spectral-resolution",
                          "grid momentum " + std::to_string(nyquist()) +
                              " does not cover the classical range plus margin " +
                              std::to_string(need) + "; increase M to at least " +
                              std::to_string(m_min));
    }

    const bool banded = V.kind == Potential::Kind::trig && !keep_eigenvectors;
    if (n == 1) {
        if (!banded && M > 4096)
            throw guard_error("dense-size",
                              "dense path is capped at M = 4096; drop the "
                              "eigenvector request or use a trig potential");
        if (banded) {
            const TrigAxis ax = trig_axis(V, 0, true);
            require_arg(ax.degree() < M / 4, "trig degree too close to M");
            require_arg(M <= (1 << 17), "banded path is capped at M = 2^17");
        }
    } else {
        const bool merged = banded && separable(V);
        if (!merged && M > 64)
            throw guard_error("dense-size",
                              "2-d problems without separable structure are "
                              "capped at M = 64 per axis");
        if (merged) require_arg(M <= (1 << 14), "merged path is capped at M = 2^14");
    }
}

SpectrumResult diagonalize(const SchrodingerProblem& p) {
    p.validate();
    SpectrumResult out;
    out.hbar = p.hbar;
    out.n = p.n;
    out.window = p.window;

    const bool banded = p.V.kind == Potential::Kind::trig && !p.keep_eigenvectors;
    if (p.n == 1 && banded) {
        const std::vector<double> w =
            banded_axis_eigenvalues(trig_axis(p.V, 0, true), p.hbar, p.M);
        retain_window(w, nullptr, 0, p.window, 1.0, out);
    } else if (p.n == 2 && banded && separable(p.V)) {
        const std::vector<double> w1 =
            banded_axis_eigenvalues(trig_axis(p.V, 0, true), p.hbar, p.M);
        std::vector<double> w2 =
            banded_axis_eigenvalues(trig_axis(p.V, 1, false), p.hbar, p.M);
        std::sort(w2.begin(), w2.end());
        for (double e1 : w1) {
            auto lo = std::lower_bound(w2.begin(), w2.end(), -p.window - e1);
            auto hi = std::upper_bound(w2.begin(), w2.end(), p.window - e1);
            for (auto it = lo; it != hi; ++it) {
                const double e = e1 + *it;
                if (std::abs(e) <= p.window) out.eigenvalues.push_back(e);
            }
        }
    } else {
        // dense pseudospectral matrix on the position grid
        const int dim = p.n == 1 ? p.M : p.M * p.M;
        const double dx = p.period / p.M;
        const std::vector<double> col = kinetic_column(p.hbar, p.M, p.period);
        std::vector<double> A(static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim),
                              0.0);
        if (p.n == 1) {
            for (int j = 0; j < dim; ++j) {
                const double x = -p.period / 2.0 + j * dx;
                for (int i = 0; i < dim; ++i)
                    A[static_cast<std::size_t>(j) * static_cast<std::size_t>(dim) +
                      static_cast<std::size_t>(i)] =
                        col[static_cast<std::size_t>((i - j + p.M) % p.M)];
                A[static_cast<std::size_t>(j) * static_cast<std::size_t>(dim) +
                  static_cast<std::size_t>(j)] += p.V.eval(&x);
            }
        } else {
            for (int j1 = 0; j1 < p.M; ++j1)
                for (int j2 = 0; j2 < p.M; ++j2) {
                    const int q = j1 * p.M + j2;
                    const double x[2] = {-p.period / 2.0 + j1 * dx,
                                         -p.period / 2.0 + j2 * dx};
                    for (int i1 = 0; i1 < p.M; ++i1) {
                        const double t1 =
                            col[static_cast<std::size_t>((i1 - j1 + p.M) % p.M)];
                        for (int i2 = 0; i2 < p.M; ++i2) {
                            const int r = i1 * p.M + i2;
                            double v = 0.0;
                            if (j2 == i2) v += t1;
                            if (j1 == i1)
                                v += col[static_cast<std::size_t>((i2 - j2 + p.M) % p.M)];
                            if (r == q) v += p.V.eval(x);
                            A[static_cast<std::size_t>(q) * static_cast<std::size_t>(dim) +
                              static_cast<std::size_t>(r)] = v;
                        }
                    }
                }
        }
        const DenseResult r = dense_eigensolve(A, dim, p.keep_eigenvectors);
        const double cell = p.n == 1 ? dx : dx * dx;
        retain_window(r.w, &r, dim, p.window, cell, out);
        if (p.keep_eigenvectors) out.grid = torus_grid_nd(p.n, p.period, p.M);
    }
    std::sort(out.eigenvalues.begin(), out.eigenvalues.end());
    return out;
}

SpectrumResult harmonic_surrogate(double hbar, double window) {
    require_arg(hbar > 0.0 && window > 0.0, "hbar and window must be positive");
    SpectrumResult out;
    out.hbar = hbar;
    out.n = 1;
    out.window = window;
    const long long jmin =
        std::max(0LL, static_cast<long long>(std::ceil((1.0 - window) / hbar - 0.5)));
    const long long jmax =
        static_cast<long long>(std::floor((1.0 + window) / hbar - 0.5));
    for (long long j = jmin; j <= jmax; ++j) {
        const double e = hbar * (j + 0.5) - 1.0;
        if (std::abs(e) <= window) out.eigenvalues.push_back(e);
    }
    return out;
}

namespace {

struct LiouvilleDomain {
    double lo = 0.0, hi = 0.0; // per-axis position range
    bool periodic = false;
};

LiouvilleDomain liouville_domain(const Potential& V, const LiouvilleOptions& opts) {
    LiouvilleDomain d;
    if (V.kind == Potential::Kind::trig) {
        d.lo = -pi;
        d.hi = pi;
        d.periodic = true;
    } else {
        d.lo = -opts.box_halfwidth;
        d.hi = opts.box_halfwidth;
    }
    return d;
}

// exact xi-integral: phase-space volume of {1/2 xi^2 + V <= e} over one
// position interval, via the turning-point substitution
double volume_1d(const Potential& V, double e, const LiouvilleDomain& dom) {
    const int scan = 16384;
    const double h = (dom.hi - dom.lo) / scan;
    auto f = [&](double x) { return V.eval(&x) - e; };
    std::vector<double> roots;
    double prev = f(dom.lo);
    for (int i = 1; i <= scan; ++i) {
        const double x = dom.lo + i * h;
        const double cur = f(x);
        if ((prev < 0.0) != (cur < 0.0)) {
            double a = x - h, b = x;
            for (int it = 0; it < 80; ++it) {
                const double m = 0.5 * (a + b);
                ((f(a) < 0.0) != (f(m) < 0.0) ? b : a) = m;
            }
            roots.push_back(0.5 * (a + b));
        }
        prev = cur;
    }
    auto speed = [&](double x) {
        return std::sqrt(std::max(0.0, 2.0 * (e - V.eval(&x))));
    };
    std::vector<std::pair<double, double>> segs;
    if (roots.empty()) {
        if (f(0.5 * (dom.lo + dom.hi)) < 0.0) segs.push_back({dom.lo, dom.hi});
    } else if (dom.periodic) {
        for (std::size_t i = 0; i + 1 < roots.size(); ++i)
            segs.push_back({roots[i], roots[i + 1]});
        segs.push_back({roots.back(), roots.front() + (dom.hi - dom.lo)});
    } else {
        std::vector<double> cuts;
        cuts.push_back(dom.lo);
        cuts.insert(cuts.end(), roots.begin(), roots.end());
        cuts.push_back(dom.hi);
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
            segs.push_back({cuts[i], cuts[i + 1]});
    }
    double total = 0.0;
    for (const auto& [a, b] : segs) {
        if (b - a < 1e-14) continue;
        if (f(0.5 * (a + b)) >= 0.0) continue;
        // x = a + (b-a)(1-cos t)/2 flattens the sqrt turning points
        total += gl_panels(
            [&](double t) {
                const double x = a + (b - a) * 0.5 * (1.0 - std::cos(t));
                return speed(x) * (b - a) * 0.5 * std::sin(t);
            },
            0.0, pi, 8);
    }
    return 2.0 * total;
}

// 2 pi int (e - V)_+ dx over the position square
double volume_2d(const Potential& V, double e, const LiouvilleDomain& dom) {
    const int Ng = 1024;
    const double h = (dom.hi - dom.lo) / Ng;
    const int count = dom.periodic ? Ng : Ng + 1;
    std::vector<double> rows(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double wi = dom.periodic || (i > 0 && i < Ng) ? 1.0 : 0.5;
        double s = 0.0;
        for (int j = 0; j < count; ++j) {
            const double wj = dom.periodic || (j > 0 && j < Ng) ? 1.0 : 0.5;
            const double x[2] = {dom.lo + i * h, dom.lo + j * h};
            s += wj * std::max(0.0, e - V.eval(x));
        }
        rows[static_cast<std::size_t>(i)] = wi * s;
    }
    return 2.0 * pi * pairwise_sum(rows.data(), rows.size()) * h * h;
}

} // namespace

LevelSetMeasure liouville_measure(const Potential& V, int n, double E,
                                  MeasureMethod method, const LiouvilleOptions& opts) {
    require_arg(n == 1 || n == 2, "dimension must be 1 or 2");
    require_arg(V.n == n, "potential dimension mismatch");
    require_arg(opts.delta_scale > 0.0 && opts.box_halfwidth > 0.0,
                "options must be positive");
    const LiouvilleDomain dom = liouville_domain(V, opts);
    const double vmin = V.min_value(dom.hi);
    const double vmax = V.max_value(dom.hi);
    const double scale = std::max(1.0, vmax - vmin);
    const double delta = opts.delta_scale * scale;

    // regular-value hypothesis: |grad H| bounded below on the sampled level set
    {
        const int scan = n == 1 ? 8192 : 1024;
        const double h = (dom.hi - dom.lo) / scan;
        double worst = std::numeric_limits<double>::infinity();
        std::vector<double> g(static_cast<std::size_t>(n));
        const int jmax = n == 1 ? 1 : scan;
        for (int i = 0; i < scan; ++i)
            for (int j = 0; j < jmax; ++j) {
                double x[2] = {dom.lo + i * h, dom.lo + j * h};
                const double v = V.eval(x);
                if (v > E) continue;
                V.grad(x, g.data());
                double s = 2.0 * (E - v);
                for (int a = 0; a < n; ++a) s += g[static_cast<std::size_t>(a)] * g[static_cast<std::size_t>(a)];
                worst = std::min(worst, std::sqrt(s));
            }
        if (std::isfinite(worst) && worst <= 1e-3)
            throw guard_error("hypothesis-violation",
                              "zero is not a numerically regular value: min |grad H| = " +
                                  std::to_string(worst));
    }

    LevelSetMeasure out;
    out.energy = E;
    out.method = method;
    if (method == MeasureMethod::volume_derivative) {
        auto vol = [&](double e) {
            return n == 1 ? volume_1d(V, e, dom) : volume_2d(V, e, dom);
        };
        const double d1 = (vol(E + delta) - vol(E - delta)) / (2.0 * delta);
        const double d2 = (vol(E + delta / 2) - vol(E - delta / 2)) / delta;
        out.value = (4.0 * d2 - d1) / 3.0;
        out.error = std::max(std::abs(d2 - d1) / 3.0, 1e-12 * std::abs(out.value));
        if (out.value < 0.0 && out.value > -1e-12) out.value = 0.0;
    } else {
        const double cap = std::sqrt(2.0 * std::max(0.0, E + delta - vmin));
        if (cap == 0.0) return out; // level shell is empty
        std::mt19937_64 rng(opts.seed);
        std::uniform_real_distribution<double> ux(dom.lo, dom.hi);
        std::uniform_real_distribution<double> uxi(-cap, cap);
        std::size_t hits = 0;
        double x[2] = {0.0, 0.0}, xi[2] = {0.0, 0.0};
        for (std::size_t s = 0; s < opts.mc_samples; ++s) {
            for (int a = 0; a < n; ++a) x[a] = ux(rng);
            for (int a = 0; a < n; ++a) xi[a] = uxi(rng);
            double hval = V.eval(x);
            for (int a = 0; a < n; ++a) hval += 0.5 * xi[a] * xi[a];
            if (std::abs(hval - E) <= delta) ++hits;
        }
        const double boxvol =
            std::pow(dom.hi - dom.lo, n) * std::pow(2.0 * cap, n);
        const double p = double(hits) / double(opts.mc_samples);
        out.value = p * boxvol / (2.0 * delta);
        out.error = boxvol *
                    std::sqrt(std::max(p * (1.0 - p), 1.0 / double(opts.mc_samples)) /
                              double(opts.mc_samples)) /
                    (2.0 * delta);
    }
    return out;
}

std::vector<double> apply_p_phi(const SpectrumResult& s, const TestFunction& phi) {
    require_arg(s.hbar > 0.0, "spectrum must carry hbar");
    const double rt = std::sqrt(s.hbar);
    std::vector<double> out;
    out.reserve(s.eigenvalues.size());
    for (double e : s.eigenvalues) out.push_back(phi.eval(e / rt));
    return out;
}

std::vector<double> p_phi_kernel(const SpectrumResult& s, const TestFunction& phi) {
    require_arg(!s.eigenvectors.empty(), "kernel assembly needs eigenvectors");
    const std::size_t dim = s.eigenvectors.front().size();
    const std::vector<double> mult = apply_p_phi(s, phi);
    std::vector<double> K(dim * dim, 0.0);
    for (std::size_t j = 0; j < s.eigenvectors.size(); ++j) {
        const double m = mult[j];
        if (m == 0.0) continue;
        const std::vector<double>& v = s.eigenvectors[j];
        for (std::size_t r = 0; r < dim; ++r) {
            const double mr = m * v[r];
            for (std::size_t c = 0; c < dim; ++c) K[r * dim + c] += mr * v[c];
        }
    }
    return K;
}

ScaledTraceRecord scaled_trace_check(const SpectrumResult& s, const TestFunction& phi,
                                     const LevelSetMeasure& theta) {
    require_arg(s.hbar > 0.0 && s.window > 0.0, "spectrum must carry hbar and window");
    const double rt = std::sqrt(s.hbar);
    const double reach = std::abs(phi.center) + phi.decay_radius(1e-14);
    if (s.window < rt * reach)
        throw guard_error("trace-window",
                          "retained window " + std::to_string(s.window) +
                              " is narrower than the multiplier's support " +
                              std::to_string(rt * reach) +
                              "; widen the window or shrink hbar");
    std::vector<double> terms = apply_p_phi(s, phi);
    ScaledTraceRecord rec;
    rec.hbar = s.hbar;
    rec.lhs = pairwise_sum(terms.data(), terms.size());
    rec.rhs = std::pow(2.0 * pi, -s.n) * std::pow(s.hbar, 0.5 - s.n) * theta.value *
              phi.integral();
    if (rec.rhs != 0.0) {
        rec.ratio = rec.lhs / rec.rhs;
        rec.deviation = rec.ratio - 1.0;
    } else {
        rec.ratio = std::numeric_limits<double>::quiet_NaN();
        rec.deviation = std::numeric_limits<double>::quiet_NaN();
    }
    return rec;
}

ScaledTraceStudy scaled_trace_study(const std::vector<SpectrumResult>& results,
                                    const TestFunction& phi,
                                    const LevelSetMeasure& theta) {
    require_arg(results.size() >= 3, "need at least three hbar values");
    ScaledTraceStudy st;
    st.decay_mode = std::abs(phi.integral()) < 1e-12;
    std::vector<double> lx, ly;
    for (const SpectrumResult& s : results) {
        const ScaledTraceRecord rec = scaled_trace_check(s, phi, theta);
        st.records.push_back(rec);
        const double y = st.decay_mode ? std::abs(rec.lhs) : std::abs(rec.deviation);
        if (y > 0.0 && std::isfinite(y)) {
            lx.push_back(std::log(s.hbar));
            ly.push_back(std::log(y));
        }
    }
    require_arg(lx.size() >= 3, "too few usable records for the exponent fit");
    fit_line(lx, ly, st.exponent, st.r_squared);
    return st;
}

WeylCountRecord weyl_count_check(const SpectrumResult& s, double c, double alpha,
                                 const LevelSetMeasure& theta) {
    require_arg(c >= 0.0, "c must be nonnegative");
    require_arg(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    require_arg(s.hbar > 0.0, "spectrum must carry hbar");
    WeylCountRecord rec;
    rec.window = c * std::pow(s.hbar, alpha);
    if (s.window < 2.0 * rec.window)
        throw guard_error("count-window",
                          "spectrum is only complete out to " + std::to_string(s.window) +
                              " but the counting check needs " +
                              std::to_string(2.0 * rec.window));
    for (double e : s.eigenvalues)
        if (std::abs(e) <= rec.window) ++rec.count;
    rec.prediction = 2.0 * c * std::pow(2.0 * pi, -s.n) *
                     std::pow(s.hbar, alpha - s.n) * theta.value;
    rec.ratio = rec.prediction != 0.0 ? double(rec.count) / rec.prediction
                                      : std::numeric_limits<double>::quiet_NaN();
    return rec;
}

cdouble gamma_decay(const TestFunction& rho, const CutoffComplement& chi_c,
                    double lambda, double hbar, double box) {
    require_arg(hbar > 0.0, "hbar must be positive");
    require_arg(chi_c.inner >= 0.0 && chi_c.outer >= chi_c.inner,
                "cutoff radii must satisfy 0 <= inner <= outer");
    const double rt = std::sqrt(hbar);
    const double reach = rt * (std::abs(rho.center) + rho.decay_radius(1e-18));
    if (box > 0.0 && box < reach)
        throw guard_error("quadrature-box",
                          "integration box " + std::to_string(box) +
                              " clips the integrand; the scaled test function "
                              "needs at least " +
                              std::to_string(reach));
    const double hi = reach;
    const double lo = chi_c.inner;
    if (!(lo < hi)) return cdouble(0.0, 0.0); // chi_c vanishes on the support

    const double plen = std::min({pi / std::max(1.0, std::abs(lambda)) * 0.5,
                                  rt * rho.width * 0.5, hi - lo});
    const int panels = static_cast<int>(std::ceil((hi - lo) / plen));
    std::vector<cdouble> sums(static_cast<std::size_t>(2 * panels));
    const double h = (hi - lo) / panels;
    for (int side = 0; side < 2; ++side) {
        const double sgn = side == 0 ? 1.0 : -1.0;
        for (int p = 0; p < panels; ++p) {
            const double mid = lo + (p + 0.5) * h, half = 0.5 * h;
            cdouble acc(0.0, 0.0);
            for (int q = 0; q < 16; ++q) {
                for (double s : {sgn * (mid + half * gl_x[q]),
                                 sgn * (mid - half * gl_x[q])}) {
                    const double f = rho.eval(s / rt) * chi_c.eval(s);
                    acc += gl_w[q] * f * std::polar(1.0, lambda * s);
                }
            }
            sums[static_cast<std::size_t>(side * panels + p)] = acc * half;
        }
    }
    return pairwise_sum(sums.data(), sums.size());
}

GammaDecayReport gamma_decay_report(const TestFunction& rho,
                                    const CutoffComplement& chi_c,
                                    const std::vector<double>& lambdas,
                                    const std::vector<double>& hbars) {
    require_arg(!lambdas.empty() && !hbars.empty(), "lattice must be nonempty");
    GammaDecayReport rep;
    for (double hb : hbars) {
        double prev = std::numeric_limits<double>::infinity();
        for (double lam : lambdas) {
            GammaLatticePoint pt;
            pt.lambda = lam;
            pt.hbar = hb;
            pt.gamma_abs = std::abs(gamma_decay(rho, chi_c, lam, hb));
            if (pt.gamma_abs > prev) rep.monotone_in_lambda = false;
            prev = pt.gamma_abs;
            for (int k = 0; k <= 4; ++k)
                for (int N = 0; N <= 4; ++N) {
                    const double c = pt.gamma_abs * std::pow(lam, k) * std::pow(hb, -N);
                    auto& slot = rep.bound_constant[static_cast<std::size_t>(k)]
                                                   [static_cast<std::size_t>(N)];
                    slot = std::max(slot, c);
                }
            rep.lattice.push_back(pt);
        }
    }
    return rep;
}

} // namespace isotropica
