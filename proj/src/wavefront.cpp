#include "isotropica/wavefront.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "isotropica/errors.hpp"
#include "isotropica/parallel.hpp"

namespace isotropica {

namespace {

constexpr double pi = std::numbers::pi;

// indices of grid nodes along axis a within reach of c (wrapped if periodic),
// paired with their displacement from c
struct AxisWindow {
    std::vector<int> idx;
    std::vector<double> delta;
};

AxisWindow axis_window(const GridSpec& g, int a, double c, double reach) {
    AxisWindow w;
    const AxisSpec& ax = g.axis(a);
    const double L = ax.hi - ax.lo;
    for (int i = 0; i < ax.m; ++i) {
        double d = g.point(a, i) - c;
        if (ax.periodic) d -= L * std::round(d / L);
        if (std::abs(d) <= reach) {
            w.idx.push_back(i);
            w.delta.push_back(d);
        }
    }
    return w;
}

} // namespace

double HusimiField::max_value() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, v);
    return m;
}

double HusimiField::total_mass() const {
    const std::size_t nq = grid.momentum.size();
    std::vector<double> terms(values.size());
    for (std::size_t ip = 0; ip < grid.position.size(); ++ip) {
        std::vector<int> pidx(static_cast<std::size_t>(grid.position.dim()));
        grid.position.unflatten(ip, pidx.data());
        double pw = 1.0;
        for (int a = 0; a < grid.position.dim(); ++a)
            pw *= grid.position.node_weight(a, pidx[std::size_t(a)]) *
                  grid.position.spacing(a);
        for (std::size_t iq = 0; iq < nq; ++iq) {
            std::vector<int> qidx(static_cast<std::size_t>(grid.momentum.dim()));
            grid.momentum.unflatten(iq, qidx.data());
            double qw = 1.0;
            for (int a = 0; a < grid.momentum.dim(); ++a)
                qw *= grid.momentum.node_weight(a, qidx[std::size_t(a)]) *
                      grid.momentum.spacing(a);
            terms[ip * nq + iq] = values[ip * nq + iq] * pw * qw;
        }
    }
    return pairwise_sum(terms.data(), terms.size());
}

HusimiField fbi_transform(const SampledField& field, const PhaseSpaceGrid& psg) {
    field.check();
    const int n = field.grid.dim();
    require_arg(psg.position.dim() == n && psg.momentum.dim() == n,
                "phase-space grid dimension must match the field");
    const double hb = field.hbar;
    const double rt = std::sqrt(hb);

    HusimiField out;
    out.grid = psg;
    out.hbar = hb;
    out.values.assign(psg.size(), 0.0);
    for (int a = 0; a < n; ++a) {
        if (psg.position.spacing(a) > rt || psg.momentum.spacing(a) > rt) {
            out.warnings.push_back(
                "resolution: phase-space grid spacing exceeds sqrt(hbar)");
            break;
        }
    }

    // per-node quadrature weight of the field grid, axis-factorized
    std::vector<std::vector<double>> axis_wt(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a) {
        axis_wt[std::size_t(a)].resize(std::size_t(field.grid.axis(a).m));
        for (int i = 0; i < field.grid.axis(a).m; ++i)
            axis_wt[std::size_t(a)][std::size_t(i)] =
                field.grid.node_weight(a, i) * field.grid.spacing(a);
    }

    const double reach = 12.0 * rt;
    const double norm = std::pow(pi * hb, -0.5 * n); // |.|^2 of (pi hbar)^{-n/4}
    const std::size_t nq = psg.momentum.size();

    parallel_for(psg.position.size(), [&](std::size_t ip) {
        std::vector<double> x0(static_cast<std::size_t>(n));
        psg.position.coords(ip, x0.data());

        std::vector<AxisWindow> win(static_cast<std::size_t>(n));
        std::size_t wsize = 1;
        for (int a = 0; a < n; ++a) {
            win[std::size_t(a)] =
                axis_window(field.grid, a, x0[std::size_t(a)], reach);
            wsize *= win[std::size_t(a)].idx.size();
        }
        if (wsize == 0) return;

        // gather the windowed, Gaussian-weighted samples once per x0
        std::vector<cdouble> amp(wsize);
        std::vector<double> pos(wsize * std::size_t(n));
        std::vector<std::size_t> widx(static_cast<std::size_t>(n), 0);
        std::vector<int> gidx(static_cast<std::size_t>(n));
        for (std::size_t j = 0; j < wsize; ++j) {
            double q = 0.0, wt = 1.0;
            for (int a = 0; a < n; ++a) {
                const auto& wa = win[std::size_t(a)];
                const std::size_t k = widx[std::size_t(a)];
                gidx[std::size_t(a)] = wa.idx[k];
                q += wa.delta[k] * wa.delta[k];
                wt *= axis_wt[std::size_t(a)][std::size_t(wa.idx[k])];
                pos[j * std::size_t(n) + std::size_t(a)] =
                    field.grid.point(a, wa.idx[k]);
            }
            amp[j] = field.values[field.grid.flatten(gidx.data())] *
                     (wt * std::exp(-0.5 * q / hb));
            for (int a = n - 1; a >= 0; --a) {
                if (++widx[std::size_t(a)] < win[std::size_t(a)].idx.size()) break;
                widx[std::size_t(a)] = 0;
            }
        }

        std::vector<double> xi0(static_cast<std::size_t>(n));
        std::vector<cdouble> terms(wsize);
        for (std::size_t iq = 0; iq < nq; ++iq) {
            psg.momentum.coords(iq, xi0.data());
            for (std::size_t j = 0; j < wsize; ++j) {
                double ph = 0.0;
                for (int a = 0; a < n; ++a)
                    ph += xi0[std::size_t(a)] * pos[j * std::size_t(n) + std::size_t(a)];
                terms[j] = amp[j] * std::polar(1.0, -ph / hb);
            }
            const cdouble s = pairwise_sum(terms.data(), wsize);
            out.values[ip * nq + iq] = norm * std::norm(s);
        }
    });
    return out;
}

std::vector<std::vector<double>> concentration_set(const HusimiField& h,
                                                   double threshold_fraction) {
    require_arg(threshold_fraction > 0.0 && threshold_fraction < 1.0,
                "threshold fraction must lie in (0, 1)");
    const double hmax = h.max_value();
    std::vector<std::vector<double>> pts;
    if (hmax == 0.0) return pts;
    const double cut = threshold_fraction * hmax;
    const int n = h.grid.dim();
    const std::size_t nq = h.grid.momentum.size();
    std::vector<double> x0(static_cast<std::size_t>(n)), xi0(static_cast<std::size_t>(n));
    for (std::size_t ip = 0; ip < h.grid.position.size(); ++ip) {
        h.grid.position.coords(ip, x0.data());
        for (std::size_t iq = 0; iq < nq; ++iq) {
            if (h.values[ip * nq + iq] < cut) continue;
            h.grid.momentum.coords(iq, xi0.data());
            std::vector<double> pt(x0);
            pt.insert(pt.end(), xi0.begin(), xi0.end());
            pts.push_back(std::move(pt));
        }
    }
    return pts;
}

double hausdorff_distance(const std::vector<std::vector<double>>& a,
                          const std::vector<std::vector<double>>& b) {
    require_arg(!a.empty() && !b.empty(), "point sets must be nonempty");
    const std::size_t d = a.front().size();
    for (const auto& p : a) require_arg(p.size() == d, "mixed point dimensions");
    for (const auto& p : b) require_arg(p.size() == d, "mixed point dimensions");
    auto directed = [d](const std::vector<std::vector<double>>& from,
                        const std::vector<std::vector<double>>& to) {
        double worst = 0.0;
        for (const auto& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : to) {
                double s = 0.0;
                for (std::size_t i = 0; i < d; ++i)
                    s += (p[i] - q[i]) * (p[i] - q[i]);
                best = std::min(best, s);
            }
            worst = std::max(worst, best);
        }
        return std::sqrt(worst);
    };
    return std::max(directed(a, b), directed(b, a));
}

WidthScalingReport width_scaling(const std::vector<SampledField>& states, int axis) {
    require_arg(states.size() >= 4, "need at least four hbar samples");
    WidthScalingReport rep;
    std::vector<double> lx, ly;
    for (std::size_t s = 0; s < states.size(); ++s) {
        const SampledField& f = states[s];
        f.check();
        require_arg(axis >= 0 && axis < f.grid.dim(), "axis out of range");
        const std::size_t m = f.grid.size();
        std::vector<double> dens(m), xdens(m);
        std::vector<int> idx(static_cast<std::size_t>(f.grid.dim()));
        for (std::size_t i = 0; i < m; ++i) {
            f.grid.unflatten(i, idx.data());
            double w = 1.0;
            for (int a = 0; a < f.grid.dim(); ++a)
                w *= f.grid.node_weight(a, idx[std::size_t(a)]) * f.grid.spacing(a);
            dens[i] = std::norm(f.values[i]) * w;
            xdens[i] = dens[i] * f.grid.point(axis, idx[std::size_t(axis)]);
        }
        const double mass = pairwise_sum(dens.data(), m);
        if (!(mass > 0.0) || !std::isfinite(mass)) {
            rep.excluded.push_back(s);
            continue;
        }
        const double mean = pairwise_sum(xdens.data(), m) / mass;
        std::vector<double> m2terms(m);
        for (std::size_t i = 0; i < m; ++i) {
            f.grid.unflatten(i, idx.data());
            const double dxa = f.grid.point(axis, idx[std::size_t(axis)]) - mean;
            m2terms[i] = dens[i] * dxa * dxa;
        }
        const double m2 = pairwise_sum(m2terms.data(), m) / mass;
        if (!(m2 > 0.0) || !std::isfinite(m2)) {
            rep.excluded.push_back(s);
            continue;
        }
        lx.push_back(std::log(f.hbar));
        ly.push_back(std::log(m2));
    }
    require_arg(lx.size() >= 2, "too few usable moments for a fit");

    const double npts = double(lx.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
        syy += ly[i] * ly[i];
    }
    const double vx = sxx - sx * sx / npts, vy = syy - sy * sy / npts;
    const double cxy = sxy - sx * sy / npts;
    require_arg(vx > 0.0, "hbar values must be distinct");
    rep.exponent = cxy / vx;
    rep.intercept = (sy - rep.exponent * sx) / npts;
    rep.r_squared = vy > 0.0 ? cxy * cxy / (vx * vy) : 1.0;
    return rep;
}

} // namespace isotropica
