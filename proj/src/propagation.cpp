#include "isotropica/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>
#include <numbers>
#include <string>

#include <fftw3.h>

#include "isotropica/errors.hpp"
#include "isotropica/fourier.hpp"
#include "isotropica/parallel.hpp"
#include "isotropica/wavefront.hpp"

namespace isotropica {

namespace {

constexpr double pi = std::numbers::pi;

std::mutex g_plan_mutex; // FFTW plan creation is not thread-safe

double wrap_into(double x, double lo, double L) {
    double y = std::fmod(x - lo, L);
    if (y < 0.0) y += L;
    return lo + y;
}

GridSpec centered_torus(int n, double period, int m) {
    std::vector<AxisSpec> axes(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a)
        axes[static_cast<std::size_t>(a)] = {-period / 2.0, period / 2.0, m, true};
    return GridSpec(std::move(axes));
}

} // namespace

void PropagatorConfig::validate(double hbar) const {
    require_arg(dt > 0.0, "time step must be positive");
    require_arg(order == 2, "only Strang (order 2) splitting is implemented");
    require_arg(hbar > 0.0, "hbar must be positive");
    require_guard(dt <= std::sqrt(hbar) / 10.0 + 1e-15, "phase-resolution",
                  "time step " + std::to_string(dt) +
                      " exceeds sqrt(hbar)/10 = " +
                      std::to_string(std::sqrt(hbar) / 10.0));
}

ClassicalState classical_state(const Potential& V, std::vector<double> x,
                               std::vector<double> xi) {
    require_arg(static_cast<int>(x.size()) == V.n && x.size() == xi.size(),
                "phase-space point dimension must match the potential");
    ClassicalState s;
    s.x = std::move(x);
    s.xi = std::move(xi);
    double e = V.eval(s.x.data());
    for (double v : s.xi) e += 0.5 * v * v;
    require_arg(std::isfinite(e), "state energy must be finite");
    s.energy = e;
    return s;
}

ClassicalState classical_flow(const Potential& V, int n, const ClassicalState& s0,
                              double t, double step) {
    require_arg(n == V.n, "dimension mismatch");
    require_arg(static_cast<int>(s0.x.size()) == n &&
                    static_cast<int>(s0.xi.size()) == n,
                "phase-space point has the wrong dimension");
    require_arg(std::isfinite(t), "time must be finite");
    for (int a = 0; a < n; ++a)
        require_arg(std::isfinite(s0.x[static_cast<std::size_t>(a)]) &&
                        std::isfinite(s0.xi[static_cast<std::size_t>(a)]),
                    "phase-space point must be finite");

    const double step_cap = 1e-3 * V.period_scale(6.0);
    if (step <= 0.0) step = 0.25 * step_cap;
    require_guard(step <= step_cap * (1.0 + 1e-12), "flow-step",
                  "integration step " + std::to_string(step) +
                      " exceeds 1e-3 of the period scale " +
                      std::to_string(step_cap));

    ClassicalState s = classical_state(V, s0.x, s0.xi);
    const double e0 = s.energy;
    if (t != 0.0) {
        const long long nsteps =
            std::max(1LL, static_cast<long long>(std::ceil(std::abs(t) / step)));
        const double h = t / double(nsteps);
        std::vector<double> g(static_cast<std::size_t>(n));
        V.grad(s.x.data(), g.data());
        for (long long it = 0; it < nsteps; ++it) {
            for (int a = 0; a < n; ++a)
                s.xi[static_cast<std::size_t>(a)] -= 0.5 * h * g[static_cast<std::size_t>(a)];
            for (int a = 0; a < n; ++a)
                s.x[static_cast<std::size_t>(a)] += h * s.xi[static_cast<std::size_t>(a)];
            V.grad(s.x.data(), g.data());
            for (int a = 0; a < n; ++a)
                s.xi[static_cast<std::size_t>(a)] -= 0.5 * h * g[static_cast<std::size_t>(a)];
        }
    }
    double e1 = V.eval(s.x.data());
    for (double v : s.xi) e1 += 0.5 * v * v;
    s.energy = e1;
    s.energy_drift = std::abs(e1 - e0) / std::max(1.0, std::abs(e0));
    return s;
}

SampledField evolve(const SampledField& field, const SchrodingerProblem& p,
                    double t, const PropagatorConfig& cfg) {
    field.check();
    cfg.validate(p.hbar);
    require_arg(std::isfinite(t), "time must be finite");
    require_arg(field.hbar == p.hbar, "field and problem disagree on hbar");
    require_arg(p.n == 1 || p.n == 2, "torus dimension must be 1 or 2");
    require_arg(p.V.n == p.n, "potential dimension must match the torus");
    require_arg(field.grid.dim() == p.n, "field dimension mismatch");
    for (int a = 0; a < p.n; ++a) {
        const AxisSpec& ax = field.grid.axis(a);
        require_arg(ax.periodic && ax.m == p.M &&
                        std::abs((ax.hi - ax.lo) - p.period) <= 1e-12 * p.period,
                    "field does not live on the problem's torus");
    }

    SampledField out = field;
    std::size_t nsteps = cfg.steps;
    if (nsteps == 0 && t != 0.0)
        nsteps = static_cast<std::size_t>(std::ceil(std::abs(t) / cfg.dt - 1e-12));
    if (nsteps == 0) return out; // t = 0: U(0) = I
    const double h = t / double(nsteps);
    require_guard(std::abs(h) <= cfg.dt * (1.0 + 1e-9), "phase-resolution",
                  "fixed step count leaves an effective step above dt");

    const int n = p.n, M = p.M;
    const std::size_t len = out.values.size();

    // half-step potential phase per node and full-step kinetic phase per mode
    std::vector<cdouble> vhalf(len), kin(len);
    {
        std::vector<double> x(static_cast<std::size_t>(n));
        std::vector<int> idx(static_cast<std::size_t>(n));
        const double base = 2.0 * pi / p.period;
        for (std::size_t i = 0; i < len; ++i) {
            out.grid.coords(i, x.data());
            vhalf[i] = std::polar(1.0, -0.5 * h * p.V.eval(x.data()) / p.hbar);
            out.grid.unflatten(i, idx.data());
            double k2 = 0.0;
            for (int a = 0; a < n; ++a) {
                const int m = idx[static_cast<std::size_t>(a)] < M / 2
                                  ? idx[static_cast<std::size_t>(a)]
                                  : idx[static_cast<std::size_t>(a)] - M;
                const double k = base * m;
                k2 += k * k;
            }
            kin[i] = std::polar(1.0, -0.5 * h * p.hbar * k2);
        }
    }

    fftw_plan fwd = nullptr, bwd = nullptr;
    auto* data = reinterpret_cast<fftw_complex*>(out.values.data());
    {
        std::lock_guard<std::mutex> lock(g_plan_mutex);
        if (n == 1) {
            fwd = fftw_plan_dft_1d(M, data, data, FFTW_FORWARD, FFTW_ESTIMATE);
            bwd = fftw_plan_dft_1d(M, data, data, FFTW_BACKWARD, FFTW_ESTIMATE);
        } else {
            fwd = fftw_plan_dft_2d(M, M, data, data, FFTW_FORWARD, FFTW_ESTIMATE);
            bwd = fftw_plan_dft_2d(M, M, data, data, FFTW_BACKWARD, FFTW_ESTIMATE);
        }
    }
    const double scale = 1.0 / double(len);
    for (std::size_t s = 0; s < nsteps; ++s) {
        for (std::size_t i = 0; i < len; ++i) out.values[i] *= vhalf[i];
        fftw_execute(fwd);
        for (std::size_t i = 0; i < len; ++i) out.values[i] *= kin[i];
        fftw_execute(bwd);
        for (std::size_t i = 0; i < len; ++i) out.values[i] *= scale * vhalf[i];
    }
    {
        std::lock_guard<std::mutex> lock(g_plan_mutex);
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(bwd);
    }
    return out;
}

ClassicalState track_center(const SampledField& field) {
    field.check();
    const int n = field.grid.dim();
    require_arg(n >= 1, "field must have at least one axis");
    const double norm = field_l2_norm(field);
    require_guard(norm > 1e-150, "center-ambiguous",
                  "zero field has no center");
    const double rt = std::sqrt(field.hbar);

    ClassicalState c;
    c.x.assign(static_cast<std::size_t>(n), 0.0);
    c.xi.assign(static_cast<std::size_t>(n), 0.0);

    // position: circular mean of |psi|^2 on periodic axes, plain mean on
    // boxed ones (phase-space smoothing moves neither)
    {
        std::vector<double> x(static_cast<std::size_t>(n));
        std::vector<int> idx(static_cast<std::size_t>(n));
        std::vector<double> sinm(static_cast<std::size_t>(n), 0.0);
        std::vector<double> cosm(static_cast<std::size_t>(n), 0.0);
        std::vector<double> plain(static_cast<std::size_t>(n), 0.0);
        double mass = 0.0;
        for (std::size_t i = 0; i < field.values.size(); ++i) {
            field.grid.unflatten(i, idx.data());
            field.grid.coords(i, x.data());
            double w = std::norm(field.values[i]);
            for (int a = 0; a < n; ++a) w *= field.grid.node_weight(a, idx[static_cast<std::size_t>(a)]);
            mass += w;
            for (int a = 0; a < n; ++a) {
                const AxisSpec& ax = field.grid.axis(a);
                if (ax.periodic) {
                    const double th = 2.0 * pi * (x[static_cast<std::size_t>(a)] - ax.lo) / (ax.hi - ax.lo);
                    sinm[static_cast<std::size_t>(a)] += w * std::sin(th);
                    cosm[static_cast<std::size_t>(a)] += w * std::cos(th);
                } else {
                    plain[static_cast<std::size_t>(a)] += w * x[static_cast<std::size_t>(a)];
                }
            }
        }
        for (int a = 0; a < n; ++a) {
            const AxisSpec& ax = field.grid.axis(a);
            if (ax.periodic) {
                const double th = std::atan2(sinm[static_cast<std::size_t>(a)], cosm[static_cast<std::size_t>(a)]);
                c.x[static_cast<std::size_t>(a)] =
                    wrap_into(ax.lo + th * (ax.hi - ax.lo) / (2.0 * pi), ax.lo, ax.hi - ax.lo);
            } else {
                c.x[static_cast<std::size_t>(a)] = plain[static_cast<std::size_t>(a)] / mass;
            }
        }
    }

    // momentum: mean of the Fourier-side density; also bound the momentum
    // support for the cluster scan and audit the density tails
    std::vector<double> mlo(static_cast<std::size_t>(n)), mhi(static_cast<std::size_t>(n));
    {
        SampledField dual = hbar_fourier(field, +1);
        std::vector<double> xi(static_cast<std::size_t>(n));
        std::vector<int> idx(static_cast<std::size_t>(n));
        std::vector<double> mean(static_cast<std::size_t>(n), 0.0);
        double mass = 0.0, peak = 0.0;
        for (std::size_t i = 0; i < dual.values.size(); ++i)
            peak = std::max(peak, std::norm(dual.values[i]));
        for (int a = 0; a < n; ++a) {
            mlo[static_cast<std::size_t>(a)] = std::numeric_limits<double>::infinity();
            mhi[static_cast<std::size_t>(a)] = -std::numeric_limits<double>::infinity();
        }
        for (std::size_t i = 0; i < dual.values.size(); ++i) {
            dual.grid.unflatten(i, idx.data());
            dual.grid.coords(i, xi.data());
            double w = std::norm(dual.values[i]);
            for (int a = 0; a < n; ++a) w *= dual.grid.node_weight(a, idx[static_cast<std::size_t>(a)]);
            mass += w;
            for (int a = 0; a < n; ++a) mean[static_cast<std::size_t>(a)] += w * xi[static_cast<std::size_t>(a)];
            if (std::norm(dual.values[i]) > 1e-12 * peak)
                for (int a = 0; a < n; ++a) {
                    mlo[static_cast<std::size_t>(a)] = std::min(mlo[static_cast<std::size_t>(a)], xi[static_cast<std::size_t>(a)]);
                    mhi[static_cast<std::size_t>(a)] = std::max(mhi[static_cast<std::size_t>(a)], xi[static_cast<std::size_t>(a)]);
                }
        }
        for (int a = 0; a < n; ++a) c.xi[static_cast<std::size_t>(a)] = mean[static_cast<std::size_t>(a)] / mass;
        // a density grazing the representable momentum window means phase-
        // space mass is aliasing outside the scan
        for (int a = 0; a < n; ++a) {
            const AxisSpec& dax = dual.grid.axis(a);
            const double span = dax.hi - dax.lo;
            require_guard(mlo[static_cast<std::size_t>(a)] > dax.lo + 0.02 * span &&
                              mhi[static_cast<std::size_t>(a)] < dax.hi - 0.02 * span,
                          "center-ambiguous",
                          "momentum density reaches the edge of the "
                          "representable window");
        }
    }

    // single-cluster audit on a phase-space portrait over the density
    // supports (position support from |psi|^2, padded)
    {
        std::vector<double> plo(static_cast<std::size_t>(n)), phi(static_cast<std::size_t>(n));
        {
            std::vector<double> x(static_cast<std::size_t>(n));
            double peak = 0.0;
            for (std::size_t i = 0; i < field.values.size(); ++i)
                peak = std::max(peak, std::norm(field.values[i]));
            for (int a = 0; a < n; ++a) {
                plo[static_cast<std::size_t>(a)] = std::numeric_limits<double>::infinity();
                phi[static_cast<std::size_t>(a)] = -std::numeric_limits<double>::infinity();
            }
            for (std::size_t i = 0; i < field.values.size(); ++i) {
                if (std::norm(field.values[i]) <= 1e-12 * peak) continue;
                field.grid.coords(i, x.data());
                for (int a = 0; a < n; ++a) {
                    plo[static_cast<std::size_t>(a)] = std::min(plo[static_cast<std::size_t>(a)], x[static_cast<std::size_t>(a)]);
                    phi[static_cast<std::size_t>(a)] = std::max(phi[static_cast<std::size_t>(a)], x[static_cast<std::size_t>(a)]);
                }
            }
        }
        std::vector<AxisSpec> pos, mom;
        const int mcap = n == 1 ? 129 : 17;
        for (int a = 0; a < n; ++a) {
            const AxisSpec& fax = field.grid.axis(a);
            AxisSpec ax;
            ax.lo = std::max(fax.lo, plo[static_cast<std::size_t>(a)] - 6.0 * rt);
            ax.hi = std::min(fax.hi, phi[static_cast<std::size_t>(a)] + 6.0 * rt);
            ax.m = std::clamp(static_cast<int>(std::ceil((ax.hi - ax.lo) / rt)) + 1, 9, mcap);
            pos.push_back(ax);
            AxisSpec mx;
            mx.lo = mlo[static_cast<std::size_t>(a)] - 6.0 * rt;
            mx.hi = mhi[static_cast<std::size_t>(a)] + 6.0 * rt;
            mx.m = std::clamp(static_cast<int>(std::ceil((mx.hi - mx.lo) / rt)) + 1, 9, mcap);
            mom.push_back(mx);
        }
        PhaseSpaceGrid psg;
        psg.position = GridSpec(pos);
        psg.momentum = GridSpec(mom);
        HusimiField hus = fbi_transform(field, psg);

        const std::size_t nmom = static_cast<std::size_t>(psg.momentum.size());
        double hmax = 0.0;
        std::size_t imax = 0;
        for (std::size_t i = 0; i < hus.values.size(); ++i)
            if (hus.values[i] > hmax) {
                hmax = hus.values[i];
                imax = i;
            }
        std::vector<double> xp(static_cast<std::size_t>(n)), xq(static_cast<std::size_t>(n));
        std::vector<double> yp(static_cast<std::size_t>(n)), yq(static_cast<std::size_t>(n));
        psg.position.coords(imax / nmom, xp.data());
        psg.momentum.coords(imax % nmom, xq.data());
        for (std::size_t i = 0; i < hus.values.size(); ++i) {
            if (hus.values[i] < 0.5 * hmax) continue;
            psg.position.coords(i / nmom, yp.data());
            psg.momentum.coords(i % nmom, yq.data());
            double d2 = 0.0;
            for (int a = 0; a < n; ++a) {
                const AxisSpec& fax = field.grid.axis(a);
                double dx = yp[static_cast<std::size_t>(a)] - xp[static_cast<std::size_t>(a)];
                if (fax.periodic) dx = std::remainder(dx, fax.hi - fax.lo);
                const double dxi = yq[static_cast<std::size_t>(a)] - xq[static_cast<std::size_t>(a)];
                d2 += dx * dx + dxi * dxi;
            }
            require_guard(d2 <= 100.0 * field.hbar, "center-ambiguous",
                          "second concentration peak found away from the main one");
        }
    }
    return c;
}

SampledField propagate_superposition(const CoherentFamily& family,
                                     const SchrodingerProblem& p, double t,
                                     const PropagatorConfig& cfg) {
    require_arg(family.size() > 0, "family has no members");
    require_arg(family.node_weights.size() == family.nodes.size(),
                "family weights and nodes disagree");
    const GridSpec g = centered_torus(p.n, p.period, p.M);

    std::vector<SampledField> evolved(family.size());
    parallel_for(family.size(), [&](std::size_t j) {
        const CoherentState cs = family.member(family.nodes[j].data());
        SampledField f = sample_coherent_state(cs, g, p.hbar);
        evolved[j] = evolve(f, p, t, cfg);
    });

    SampledField out(g, p.hbar);
    for (std::size_t j = 0; j < family.size(); ++j) {
        const double w =
            family.node_weights[j] * family.density(family.nodes[j].data());
        for (std::size_t i = 0; i < out.values.size(); ++i)
            out.values[i] += w * evolved[j].values[i];
    }
    if (family.node_spacing > std::sqrt(p.hbar))
        out.warnings.push_back("family node spacing exceeds sqrt(hbar)");
    return out;
}

} // namespace isotropica
