#include "isotropica/states.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "isotropica/errors.hpp"
#include "isotropica/parallel.hpp"

namespace isotropica {

cdouble ModelIsotropicState::eval(const double* x, double hbar) const {
    require_arg(hbar > 0.0 && hbar <= 1.0, "hbar must lie in (0, 1]");
    const double rt = std::sqrt(hbar);
    std::vector<double> fast(l);
    for (int i = 0; i < l; ++i) fast[i] = x[k + i] / rt;

    cdouble amp = 0.0;
    double hpow = 1.0; // hbar^{j/2}
    for (const auto& term : terms) {
        amp += term.eval(x, k, fast.data(), l) * hpow;
        hpow *= rt;
    }
    const double f = phase.eval(x, n());
    return std::pow(hbar, order_r) * std::polar(1.0, f / hbar) * amp;
}

void ModelIsotropicState::check_schwartz(double vmax) const {
    if (l == 0) return;
    // Polynomial-weighted sup bound on the probed range: |shape|(1+|v|)^10
    // must take its sup away from the edge. If the weighted amplitude peaks
    // on the outer quarter the profile is not decaying on this range.
    const int samples = 65;
    std::vector<std::vector<double>> dirs;
    for (int a = 0; a < l; ++a) {
        std::vector<double> d(l, 0.0);
        d[a] = 1.0;
        dirs.push_back(d);
    }
    dirs.emplace_back(l, 1.0 / std::sqrt(double(l)));

    for (const auto& term : terms) {
        double inner_max = 0.0, outer_max = 0.0;
        std::vector<double> v(l);
        for (const auto& dir : dirs) {
            for (int i = 0; i < samples; ++i) {
                const double t = vmax * double(i) / double(samples - 1);
                for (int a = 0; a < l; ++a) v[a] = t * dir[a];
                const double weighted =
                    std::abs(term.shape.eval(v.data(), l)) * std::pow(1.0 + t, 10);
                if (t <= 0.75 * vmax)
                    inner_max = std::max(inner_max, weighted);
                else
                    outer_max = std::max(outer_max, weighted);
            }
        }
        require_guard(outer_max <= inner_max + 1e-300, "schwartz-decay",
                      "fast-profile tail fails to decay: weighted amplitude "
                      "peaks at the edge of the probed range");
    }
}

SampledField sample_model_state(const ModelIsotropicState& st, const GridSpec& g,
                                double hbar) {
    require_arg(g.dim() == st.n(), "grid dimension does not match state");
    SampledField out;
    out.grid = g;
    out.hbar = hbar;
    out.values.resize(g.size());
    parallel_for(g.size(), [&](std::size_t i) {
        std::vector<double> x(std::size_t(g.dim()));
        g.coords(i, x.data());
        out.values[i] = st.eval(x.data(), hbar);
    });
    out.check();
    return out;
}

cdouble CoherentState::eval(const double* x, double hbar) const {
    require_arg(hbar > 0.0 && hbar <= 1.0, "hbar must lie in (0, 1]");
    const double rt = std::sqrt(hbar);
    const int nn = n();
    std::vector<double> v(nn);
    for (int i = 0; i < nn; ++i) v[i] = (x[i] - x0[i]) / rt;
    const double f = phase.eval(x, nn);
    return std::polar(1.0, f / hbar) * amplitude(v.data(), hbar);
}

void CoherentState::check_center(double tol) const {
    const int nn = n();
    require_arg(static_cast<int>(xi0.size()) == nn, "x0/xi0 size mismatch");
    std::vector<double> grad(nn);
    phase.grad(x0.data(), nn, grad.data());
    double err = 0.0;
    for (int i = 0; i < nn; ++i) err = std::max(err, std::abs(grad[i] - xi0[i]));
    require_arg(err < tol, "phase gradient at the center does not match xi0");
}

CoherentState gaussian_coherent(std::vector<double> x0, std::vector<double> xi0,
                                double width) {
    require_arg(x0.size() == xi0.size(), "x0/xi0 size mismatch");
    require_arg(width > 0.0, "width must be positive");
    CoherentState st;
    const int n = static_cast<int>(x0.size());
    st.x0 = x0;
    st.xi0 = xi0;
    st.phase.kind = StatePhase::Kind::linear;
    st.phase.xi = xi0;
    st.phase.c = 0.0;
    for (int i = 0; i < n; ++i) st.phase.c -= xi0[i] * x0[i];
    const double w2 = width * width;
    st.amplitude = [n, w2](const double* v, double) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += v[i] * v[i];
        return cdouble(std::exp(-s / (2.0 * w2)), 0.0);
    };
    return st;
}

SampledField sample_coherent_state(const CoherentState& st, const GridSpec& g,
                                   double hbar) {
    require_arg(g.dim() == st.n(), "grid dimension does not match state");
    SampledField out;
    out.grid = g;
    out.hbar = hbar;
    out.values.resize(g.size());
    parallel_for(g.size(), [&](std::size_t i) {
        std::vector<double> x(std::size_t(g.dim()));
        g.coords(i, x.data());
        out.values[i] = st.eval(x.data(), hbar);
    });
    out.check();
    return out;
}

double IsotropicSubmanifoldModel::isotropy_residual(int samples_per_axis) const {
    require_arg(d >= 1 && n >= 1, "need d >= 1 and n >= 1");
    require_arg(static_cast<int>(tau_box.size()) == d, "tau_box size mismatch");
    if (d == 1) return 0.0; // a 2-form pulled back to a line vanishes

    // Pull back sum dxi_i ^ dx_i: entries
    //   omega_ab = sum_i (dxi_i/dtau_a dx_i/dtau_b - dxi_i/dtau_b dx_i/dtau_a)
    // evaluated with central differences on a parameter grid.
    std::vector<double> h(d);
    for (int a = 0; a < d; ++a) {
        const double span = tau_box[a].second - tau_box[a].first;
        require_arg(span > 0.0, "tau_box must have positive extent");
        h[a] = 1e-5 * span;
    }
    auto jacobians = [&](const std::vector<double>& tau, std::vector<double>& Jx,
                         std::vector<double>& Jxi) {
        // J*(i,a) = d(...)_i / dtau_a, row-major n x d
        std::vector<double> tp(tau), tm(tau);
        std::vector<double> xp(n), xip(n), xm(n), xim(n);
        for (int a = 0; a < d; ++a) {
            tp[a] = tau[a] + h[a];
            tm[a] = tau[a] - h[a];
            embed(tp.data(), xp.data(), xip.data());
            embed(tm.data(), xm.data(), xim.data());
            for (int i = 0; i < n; ++i) {
                Jx[std::size_t(i) * d + a] = (xp[i] - xm[i]) / (2.0 * h[a]);
                Jxi[std::size_t(i) * d + a] = (xip[i] - xim[i]) / (2.0 * h[a]);
            }
            tp[a] = tau[a];
            tm[a] = tau[a];
        }
    };

    double worst = 0.0;
    std::vector<int> idx(d, 0);
    std::vector<double> tau(d), Jx(std::size_t(n) * d), Jxi(std::size_t(n) * d);
    int total = 1;
    for (int a = 0; a < d; ++a) total *= samples_per_axis;
    for (int flat = 0; flat < total; ++flat) {
        int rem = flat;
        for (int a = d - 1; a >= 0; --a) {
            idx[a] = rem % samples_per_axis;
            rem /= samples_per_axis;
        }
        for (int a = 0; a < d; ++a) {
            const double u = (idx[a] + 0.5) / samples_per_axis;
            tau[a] = tau_box[a].first + u * (tau_box[a].second - tau_box[a].first);
        }
        jacobians(tau, Jx, Jxi);
        for (int a = 0; a < d; ++a)
            for (int b = a + 1; b < d; ++b) {
                double w = 0.0;
                for (int i = 0; i < n; ++i)
                    w += Jxi[std::size_t(i) * d + a] * Jx[std::size_t(i) * d + b] -
                         Jxi[std::size_t(i) * d + b] * Jx[std::size_t(i) * d + a];
                worst = std::max(worst, std::abs(w));
            }
    }
    return worst;
}

std::vector<std::vector<double>> IsotropicSubmanifoldModel::phase_space_samples(
    int per_dim) const {
    require_arg(per_dim >= 2, "need at least two samples per axis");
    std::vector<int> idx(d, 0);
    int total = 1;
    for (int a = 0; a < d; ++a) total *= per_dim;
    std::vector<std::vector<double>> out;
    out.reserve(std::size_t(total));
    std::vector<double> tau(d), x(n), xi(n);
    for (int flat = 0; flat < total; ++flat) {
        int rem = flat;
        for (int a = d - 1; a >= 0; --a) {
            idx[a] = rem % per_dim;
            rem /= per_dim;
        }
        for (int a = 0; a < d; ++a) {
            const double lo = tau_box[a].first, hi = tau_box[a].second;
            // closed loops: avoid duplicating the endpoint
            const double denom = (a == 0 && loop) ? per_dim : per_dim - 1;
            tau[a] = lo + (hi - lo) * idx[a] / denom;
        }
        embed(tau.data(), x.data(), xi.data());
        std::vector<double> pt(2 * std::size_t(n));
        for (int i = 0; i < n; ++i) {
            pt[i] = x[i];
            pt[std::size_t(n) + i] = xi[i];
        }
        out.push_back(std::move(pt));
    }
    return out;
}

SampledField superpose(const CoherentFamily& fam, const GridSpec& g, double hbar) {
    require_arg(hbar > 0.0 && hbar <= 1.0, "hbar must lie in (0, 1]");
    require_arg(fam.nodes.size() == fam.node_weights.size(),
                "node/weight count mismatch");
    SampledField out;
    out.grid = g;
    out.hbar = hbar;
    if (fam.node_spacing > std::sqrt(hbar))
        out.warnings.push_back("family node spacing exceeds sqrt(hbar); "
                               "superposition may under-resolve the state");

    // Materialize members once, then accumulate in fixed node order.
    const std::size_t nn = fam.size();
    std::vector<double> coeff(nn);
    std::vector<CoherentState> members;
    members.reserve(nn);
    for (std::size_t j = 0; j < nn; ++j) {
        const double* tau = fam.nodes[j].empty() ? nullptr : fam.nodes[j].data();
        coeff[j] = fam.node_weights[j] * fam.density(tau);
        members.push_back(fam.member(tau));
    }
    out.values.assign(g.size(), cdouble(0.0));
    parallel_for(g.size(), [&](std::size_t i) {
        std::vector<double> x(std::size_t(g.dim()));
        g.coords(i, x.data());
        cdouble s = 0.0;
        for (std::size_t j = 0; j < nn; ++j)
            s += coeff[j] * members[j].eval(x.data(), hbar);
        out.values[i] = s;
    });
    out.check();
    return out;
}

CoherentFamily decompose_model_state(const ModelIsotropicState& st, double hbar) {
    require_arg(hbar > 0.0 && hbar <= 1.0, "hbar must lie in (0, 1]");
    const int k = st.k, l = st.l;
    const double rt = std::sqrt(hbar);

    CoherentFamily fam;
    fam.d = k;
    fam.density = [k, hbar](const double*) {
        return std::pow(std::numbers::pi * hbar, -0.5 * k);
    };

    // Member centered at (tau, 0) with momentum grad f there; the amplitude is
    // the state's own profile re-expanded about tau times the Gaussian kernel
    // e^{-|x'-tau|^2/hbar} = e^{-|v'|^2} in packet coordinates.
    const ModelIsotropicState state = st;
    fam.member = [state, k, l](const double* tau) {
        CoherentState cs;
        const int n = k + l;
        cs.x0.assign(n, 0.0);
        for (int i = 0; i < k; ++i) cs.x0[i] = tau[i];
        cs.phase = state.phase;
        cs.xi0.resize(n);
        state.phase.grad(cs.x0.data(), n, cs.xi0.data());
        const std::vector<double> center(cs.x0);
        cs.amplitude = [state, center, k, l](const double* v, double hb) {
            const double rtl = std::sqrt(hb);
            std::vector<double> slow(k);
            double slow2 = 0.0;
            for (int i = 0; i < k; ++i) {
                slow[i] = center[i] + rtl * v[i];
                slow2 += v[i] * v[i];
            }
            cdouble amp = 0.0;
            double hpow = 1.0;
            for (const auto& term : state.terms) {
                amp += term.eval(slow.data(), k, v + k, l) * hpow;
                hpow *= rtl;
            }
            return std::pow(hb, state.order_r) * amp * std::exp(-slow2);
        };
        return cs;
    };

    if (k == 0) {
        fam.nodes.push_back({});
        fam.node_weights.push_back(1.0);
        fam.node_spacing = 0.0;
        // singleton: no kernel normalization
        fam.density = [](const double*) { return 1.0; };
        return fam;
    }

    // Slow support from the envelopes, padded by the kernel width so the
    // truncated lattice tails stay far below the reconstruction tolerance.
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (const auto& term : st.terms) {
        double a = 0.0, b = 0.0;
        term.envelope.support(a, b);
        if (first) {
            lo = a;
            hi = b;
            first = false;
        } else {
            lo = std::min(lo, a);
            hi = std::max(hi, b);
        }
    }
    require_arg(!first, "state has no profile terms");
    const double margin = 8.0 * rt;
    const double spacing = 0.5 * rt;
    const double a = lo - margin, b = hi + margin;
    const int m = static_cast<int>(std::ceil((b - a) / spacing)) + 1;
    const double start = 0.5 * (a + b) - 0.5 * spacing * (m - 1);

    std::size_t total = 1;
    for (int i = 0; i < k; ++i) total *= std::size_t(m);
    require_guard(total <= (std::size_t(1) << 24), "decomposition-size",
                  "tau lattice would exceed 2^24 nodes; increase hbar or "
                  "shrink the slow support");

    const double weight = std::pow(spacing, k);
    fam.nodes.reserve(total);
    fam.node_weights.assign(total, weight);
    std::vector<int> idx(k, 0);
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rem = flat;
        for (int axis = k - 1; axis >= 0; --axis) {
            idx[axis] = static_cast<int>(rem % std::size_t(m));
            rem /= std::size_t(m);
        }
        std::vector<double> tau(k);
        for (int axis = 0; axis < k; ++axis) tau[axis] = start + spacing * idx[axis];
        fam.nodes.push_back(std::move(tau));
    }
    fam.node_spacing = spacing;
    return fam;
}

double bohr_sommerfeld_residue(const IsotropicSubmanifoldModel& loop,
                               std::optional<double> hbar) {
    require_arg(loop.d == 1, "action residue needs a one-parameter curve");
    require_arg(loop.loop, "curve must be closed");
    require_arg(loop.tau_box.size() == 1, "tau_box size mismatch");
    const double a = loop.tau_box[0].first, b = loop.tau_box[0].second;
    const double span = b - a;
    require_arg(span > 0.0, "tau_box must have positive extent");

    // Verify closure before integrating.
    {
        std::vector<double> xa(loop.n), xia(loop.n), xb(loop.n), xib(loop.n);
        loop.embed(&a, xa.data(), xia.data());
        loop.embed(&b, xb.data(), xib.data());
        double gap = 0.0;
        for (int i = 0; i < loop.n; ++i)
            gap = std::max({gap, std::abs(xa[i] - xb[i]), std::abs(xia[i] - xib[i])});
        require_arg(gap < 1e-10, "curve endpoints do not match; the loop is not closed");
    }

    // Rectangle rule on the closed loop: spectrally accurate for smooth
    // periodic integrands. dx/dtau via central differences.
    const std::size_t m = 4096;
    const double dt = span / double(m);
    const double h = 1e-5 * span;
    std::vector<double> vals(m);
    std::vector<double> x(loop.n), xi(loop.n), xp(loop.n), xm(loop.n), scratch(loop.n);
    for (std::size_t j = 0; j < m; ++j) {
        const double t = a + dt * double(j);
        loop.embed(&t, x.data(), xi.data());
        const double tp = t + h, tm = t - h;
        loop.embed(&tp, xp.data(), scratch.data());
        loop.embed(&tm, xm.data(), scratch.data());
        double s = 0.0;
        for (int i = 0; i < loop.n; ++i)
            s += xi[i] * (xp[i] - xm[i]) / (2.0 * h);
        vals[j] = s;
    }
    const double action = pairwise_sum(vals.data(), vals.size()) * dt;
    const double unit = hbar ? *hbar : 1.0;
    require_arg(unit > 0.0, "hbar must be positive");
    return std::remainder(action, 2.0 * std::numbers::pi * unit);
}

} // namespace isotropica
