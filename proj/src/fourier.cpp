#include "isotropica/fourier.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>

namespace isotropica {

namespace {
std::mutex g_fftw_mutex; // FFTW plan creation is not thread-safe

constexpr double pi = std::numbers::pi;
} // namespace

double nyquist_momentum(const GridSpec& g, double hbar, int a) {
    return pi * hbar / g.spacing(a);
}

GridSpec dual_grid(const GridSpec& g, double hbar) {
    std::vector<AxisSpec> axes(g.dim());
    for (int a = 0; a < g.dim(); ++a) {
        double nyq = nyquist_momentum(g, hbar, a);
        axes[a] = {-nyq, nyq, g.axis(a).m, true};
    }
    return GridSpec(std::move(axes));
}

void require_xi_resolved(const GridSpec& g, double hbar, double xi_max) {
    for (int a = 0; a < g.dim(); ++a) {
        require_guard(xi_max * g.spacing(a) / hbar < pi, "fourier-resolution",
                      "grid too coarse to resolve the declared momentum support; "
                      "need dx < pi*hbar/xi_max");
    }
}

// (2 pi hbar)^(-n/2) Integral e^{-i s x.xi/hbar} psi(x) dx on the dual grid.
// Rectangle sampling of the integral; with x_j = x0 + j dx, xi_k = xi0 + k dxi
// and dx dxi = 2 pi hbar / m the kernel splits into a pre-phase on j, the
// plain DFT kernel, and a post-phase on k, so one FFT per call suffices.
SampledField hbar_fourier(const SampledField& f, int sign,
                          const std::optional<GridSpec>& target) {
    f.check();
    require_arg(sign == 1 || sign == -1, "transform sign must be +1 or -1");
    const GridSpec& g = f.grid;
    const int n = g.dim();
    const double hb = f.hbar;

    GridSpec out_grid = target ? *target : dual_grid(g, hb);
    require_arg(out_grid.dim() == n, "target grid dimension mismatch");
    for (int a = 0; a < n; ++a) {
        const int m = g.axis(a).m;
        require_arg(out_grid.axis(a).m == m, "target grid sample count mismatch");
        const double dxi = 2.0 * pi * hb / (m * g.spacing(a));
        require_arg(std::abs(out_grid.spacing(a) - dxi) <= 1e-9 * dxi,
                    "target grid spacing is not dual to the input grid");
        const double nyq = nyquist_momentum(g, hb, a);
        const double center = out_grid.axis(a).lo + 0.5 * (m - 1) * dxi;
        require_guard(std::abs(center) <= nyq * (1.0 + 1e-12), "fourier-resolution",
                      "target window recentered beyond the Nyquist momentum "
                      "pi*hbar/dx of the input grid; refine the grid");
    }

    const std::size_t total = g.size();
    std::vector<cdouble> buf(total);

    // Pre-phase: psi_j * prod_a e^{-i s (j_a dx_a) xi0_a / hbar}.
    std::vector<std::vector<cdouble>> pre(n);
    for (int a = 0; a < n; ++a) {
        const int m = g.axis(a).m;
        pre[a].resize(m);
        const double c = -sign * g.spacing(a) * out_grid.axis(a).lo / hb;
        for (int j = 0; j < m; ++j) pre[a][j] = std::polar(1.0, c * j);
    }
    std::vector<int> idx(n);
    for (std::size_t i = 0; i < total; ++i) {
        g.unflatten(i, idx.data());
        cdouble p = f.values[i];
        for (int a = 0; a < n; ++a) p *= pre[a][idx[a]];
        buf[i] = p;
    }

    {
        std::lock_guard<std::mutex> lock(g_fftw_mutex);
        std::vector<int> dims(n);
        for (int a = 0; a < n; ++a) dims[a] = g.axis(a).m;
        fftw_plan plan = fftw_plan_dft(
            n, dims.data(), reinterpret_cast<fftw_complex*>(buf.data()),
            reinterpret_cast<fftw_complex*>(buf.data()),
            sign == 1 ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
    }

    // Post-phase and normalization (2 pi hbar)^(-n/2) prod_a dx_a.
    double scale = 1.0;
    for (int a = 0; a < n; ++a) scale *= g.spacing(a) / std::sqrt(2.0 * pi * hb);
    std::vector<std::vector<cdouble>> post(n);
    for (int a = 0; a < n; ++a) {
        const int m = g.axis(a).m;
        post[a].resize(m);
        const double x0 = g.axis(a).lo;
        for (int k = 0; k < m; ++k)
            post[a][k] = std::polar(1.0, -sign * x0 * out_grid.point(a, k) / hb);
    }
    for (std::size_t i = 0; i < total; ++i) {
        out_grid.unflatten(i, idx.data());
        cdouble p = buf[i] * scale;
        for (int a = 0; a < n; ++a) p *= post[a][idx[a]];
        buf[i] = p;
    }

    SampledField out(std::move(out_grid), std::move(buf), hb);
    out.warnings = f.warnings;
    return out;
}

} // namespace isotropica
