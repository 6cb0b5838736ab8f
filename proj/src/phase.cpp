#include "isotropica/phase.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "isotropica/errors.hpp"
#include "isotropica/parallel.hpp"

namespace isotropica {

namespace {

constexpr double pi = std::numbers::pi;

double fd_step(double c) {
    static const double h0 = std::cbrt(std::numeric_limits<double>::epsilon());
    return h0 * (1.0 + std::abs(c));
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

struct QuadAxis {
    double lo = 0.0, hi = 0.0;
    int panels = 1;
    std::vector<double> pos, wt; // 32 * panels entries
};

void fill_axis_nodes(QuadAxis& ax) {
    const double len = ax.hi - ax.lo;
    const double h = len / ax.panels, half = 0.5 * h;
    ax.pos.resize(std::size_t(ax.panels) * 32);
    ax.wt.resize(std::size_t(ax.panels) * 32);
    for (int p = 0; p < ax.panels; ++p) {
        const double mid = ax.lo + (p + 0.5) * h;
        for (int q = 0; q < 16; ++q) {
            ax.pos[std::size_t(p) * 32 + 2 * q] = mid + half * gl_x[q];
            ax.pos[std::size_t(p) * 32 + 2 * q + 1] = mid - half * gl_x[q];
            ax.wt[std::size_t(p) * 32 + 2 * q] = half * gl_w[q];
            ax.wt[std::size_t(p) * 32 + 2 * q + 1] = half * gl_w[q];
        }
    }
}

Eigen::MatrixXd fd_jacobian_of(
    const PhaseFunction& ph, const std::vector<double>& x,
    const std::vector<double>& s,
    bool of_base_gradient) { // rows: d_x f (n) or d_s f (N); cols: all (x,s)
    const int n = ph.n, N = ph.N();
    const int rows = of_base_gradient ? n : N;
    Eigen::MatrixXd J(rows, n + N);
    std::vector<double> xp(x), sp(s), dx(n), ds(N), hi(rows), lo_(rows);
    for (int v = 0; v < n + N; ++v) {
        double& coord = v < n ? xp[v] : sp[v - n];
        const double c0 = coord, h = fd_step(c0);
        coord = c0 + h;
        ph.gradient(xp.data(), sp.data(), dx.data(), ds.data());
        for (int r = 0; r < rows; ++r) hi[r] = of_base_gradient ? dx[r] : ds[r];
        coord = c0 - h;
        ph.gradient(xp.data(), sp.data(), dx.data(), ds.data());
        for (int r = 0; r < rows; ++r) lo_[r] = of_base_gradient ? dx[r] : ds[r];
        coord = c0;
        for (int r = 0; r < rows; ++r) J(r, v) = (hi[r] - lo_[r]) / (2.0 * h);
    }
    return J;
}

int svd_rank(const Eigen::MatrixXd& m, double tol) {
    if (m.rows() == 0 || m.cols() == 0) return 0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) return 0;
    int r = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > tol * sv(0)) ++r;
    return r;
}

// Newton refinement of d_s f(x, .) = 0 at fixed x; pseudo-inverse steps.
// Returns false if 50 iterations do not reach the critical set.
bool newton_critical(const PhaseFunction& ph, const std::vector<double>& x,
                     std::vector<double>& s) {
    const int n = ph.n, N = ph.N();
    std::vector<double> dx(n), ds(N);
    for (int iter = 0; iter < 50; ++iter) {
        ph.gradient(x.data(), s.data(), dx.data(), ds.data());
        double res = 0.0, mag = 0.0;
        for (int i = 0; i < N; ++i) {
            res = std::max(res, std::abs(ds[i]));
            mag = std::max(mag, std::abs(s[i]));
        }
        if (res < 1e-11 * (1.0 + mag)) return true;

        Eigen::MatrixXd H(N, N);
        std::vector<double> sp(s), d2(N);
        for (int v = 0; v < N; ++v) {
            const double c0 = sp[v], h = fd_step(c0);
            sp[v] = c0 + h;
            ph.gradient(x.data(), sp.data(), dx.data(), d2.data());
            for (int r = 0; r < N; ++r) H(r, v) = d2[r];
            sp[v] = c0 - h;
            ph.gradient(x.data(), sp.data(), dx.data(), d2.data());
            for (int r = 0; r < N; ++r) H(r, v) = (H(r, v) - d2[r]) / (2.0 * h);
            sp[v] = c0;
        }
        Eigen::VectorXd rhs(N);
        for (int i = 0; i < N; ++i) rhs(i) = -ds[i];
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(
            H, Eigen::ComputeThinU | Eigen::ComputeThinV);
        svd.setThreshold(1e-10);
        Eigen::VectorXd step = svd.solve(rhs);
        if (step.lpNorm<Eigen::Infinity>() < 1e-15 * (1.0 + mag) &&
            res >= 1e-11 * (1.0 + mag))
            return false; // pseudo-inverse step vanished short of the set
        for (int i = 0; i < N; ++i) {
            double st = step(i);
            st = std::clamp(st, -10.0, 10.0);
            s[i] += st;
        }
    }
    return false;
}

} // namespace

double PhaseFunction::eval(const double* x, const double* s) const {
    return f(x, s);
}

void PhaseFunction::gradient(const double* x, const double* s, double* dx,
                             double* ds) const {
    if (grad) {
        grad(x, s, dx, ds);
        return;
    }
    std::vector<double> xp(x, x + n), sp(s, s + N());
    for (int i = 0; i < n; ++i) {
        const double c0 = xp[i], h = fd_step(c0);
        xp[i] = c0 + h;
        const double fp = f(xp.data(), sp.data());
        xp[i] = c0 - h;
        const double fm = f(xp.data(), sp.data());
        xp[i] = c0;
        dx[i] = (fp - fm) / (2.0 * h);
    }
    for (int i = 0; i < N(); ++i) {
        const double c0 = sp[i], h = fd_step(c0);
        sp[i] = c0 + h;
        const double fp = f(xp.data(), sp.data());
        sp[i] = c0 - h;
        const double fm = f(xp.data(), sp.data());
        sp[i] = c0;
        ds[i] = (fp - fm) / (2.0 * h);
    }
}

PhaseFunction model_phase(int k, int l) {
    require_arg(k >= 0, "k must be nonnegative");
    require_arg(l >= 1, "need at least one fast direction to parametrize");
    PhaseFunction ph;
    ph.n = k + l;
    ph.K = l;
    ph.l = l;
    ph.name = "model(" + std::to_string(k) + "," + std::to_string(l) + ")";
    ph.f = [k, l](const double* x, const double* s) {
        double v = 0.0;
        for (int i = 0; i < l; ++i) v += s[i] * (x[k + i] - s[l + i]);
        return v;
    };
    ph.grad = [k, l](const double* x, const double* s, double* dx, double* ds) {
        for (int i = 0; i < k; ++i) dx[i] = 0.0;
        for (int i = 0; i < l; ++i) {
            dx[k + i] = s[i];
            ds[i] = x[k + i] - s[l + i];
            ds[l + i] = -s[i];
        }
    };
    return ph;
}

PhaseFunction fold_phase() {
    PhaseFunction ph;
    ph.n = 1;
    ph.K = 1;
    ph.l = 0;
    ph.name = "fold";
    ph.f = [](const double* x, const double* s) { return s[0] * x[0] * x[0]; };
    ph.grad = [](const double* x, const double* s, double* dx, double* ds) {
        dx[0] = 2.0 * s[0] * x[0];
        ds[0] = x[0] * x[0];
    };
    return ph;
}

PhaseFunction identity_relation_phase(int nx) {
    require_arg(nx >= 1, "nx must be positive");
    PhaseFunction ph;
    ph.n = 2 * nx;
    ph.K = nx;
    ph.l = 0;
    ph.name = "identity(" + std::to_string(nx) + ")";
    ph.f = [nx](const double* x, const double* s) {
        double v = 0.0;
        for (int i = 0; i < nx; ++i) v += s[i] * (x[i] - x[nx + i]);
        return v;
    };
    ph.grad = [nx](const double* x, const double* s, double* dx, double* ds) {
        for (int i = 0; i < nx; ++i) {
            dx[i] = s[i];
            dx[nx + i] = -s[i];
            ds[i] = x[i] - x[nx + i];
        }
    };
    return ph;
}

PhaseFunction fourier_pairing_phase(int nx) {
    require_arg(nx >= 1, "nx must be positive");
    PhaseFunction ph;
    ph.n = 2 * nx;
    ph.K = 0;
    ph.l = 0;
    ph.name = "fourier(" + std::to_string(nx) + ")";
    ph.f = [nx](const double* x, const double*) {
        double v = 0.0;
        for (int i = 0; i < nx; ++i) v -= x[i] * x[nx + i];
        return v;
    };
    ph.grad = [nx](const double* x, const double*, double* dx, double*) {
        for (int i = 0; i < nx; ++i) {
            dx[i] = -x[nx + i];
            dx[nx + i] = -x[i];
        }
    };
    return ph;
}

PhaseFunction compose_phase(const PhaseFunction& f, const PhaseFunction& g,
                            int ny) {
    require_arg(ny >= 1 && ny < g.n, "ny must split g's base");
    require_arg(g.n - ny == f.n, "x-dims of the factors do not match");
    require_arg(g.l == 0, "the graph factor must have no scaled fiber block");
    PhaseFunction F;
    const int nf = f.n, Kg = g.K, Kf = f.K, lf = f.l;
    F.n = ny;
    F.K = nf + Kg + Kf;
    F.l = lf;
    F.name = "composed(" + g.name + "," + f.name + ")";
    // fiber layout: (x, s_g, t_f, u_f)
    const PhaseFunction fc = f, gc = g;
    F.f = [fc, gc, ny, nf, Kg](const double* y, const double* S) {
        std::vector<double> gbase(static_cast<std::size_t>(ny + nf));
        for (int i = 0; i < ny; ++i) gbase[i] = y[i];
        for (int i = 0; i < nf; ++i) gbase[ny + i] = S[i];
        return fc.f(S, S + nf + Kg) + gc.f(gbase.data(), S + nf);
    };
    if (f.grad && g.grad) {
        F.grad = [fc, gc, ny, nf, Kg, Kf, lf](const double* y, const double* S,
                                              double* dy, double* dS) {
            std::vector<double> gbase(static_cast<std::size_t>(ny + nf));
            for (int i = 0; i < ny; ++i) gbase[i] = y[i];
            for (int i = 0; i < nf; ++i) gbase[ny + i] = S[i];
            std::vector<double> dgb(static_cast<std::size_t>(ny + nf)), dgs(static_cast<std::size_t>(Kg));
            gc.grad(gbase.data(), S + nf, dgb.data(), dgs.data());
            std::vector<double> dfx(static_cast<std::size_t>(nf)), dfs(static_cast<std::size_t>(Kf + lf));
            fc.grad(S, S + nf + Kg, dfx.data(), dfs.data());
            for (int i = 0; i < ny; ++i) dy[i] = dgb[i];
            for (int i = 0; i < nf; ++i) dS[i] = dfx[i] + dgb[ny + i];
            for (int i = 0; i < Kg; ++i) dS[nf + i] = dgs[i];
            for (int i = 0; i < Kf + lf; ++i) dS[nf + Kg + i] = dfs[i];
        };
    }
    return F;
}

void Amplitude::check() const {
    require_arg(static_cast<int>(t_box.size()) == K,
                "declared t-support must cover every t axis");
    std::vector<double> tmid(K), w0(std::max(l, 1), 0.0);
    for (int i = 0; i < K; ++i) tmid[i] = 0.5 * (t_box[i].first + t_box[i].second);
    const double peak = std::abs(eval(nullptr, tmid.data(), w0.data(), 1e-2));
    require_arg(std::isfinite(peak), "amplitude is not finite at its center");

    // compact t-support within the declared boxes
    for (int i = 0; i < K; ++i) {
        std::vector<double> t(tmid);
        const double halfw = 0.5 * (t_box[i].second - t_box[i].first);
        for (double fac : {1.1, 1.5, 2.5}) {
            t[i] = tmid[i] + fac * halfw;
            require_arg(std::abs(eval(nullptr, t.data(), w0.data(), 1e-2)) <=
                            1e-10 * (peak + 1e-300),
                        "amplitude is not supported inside its declared t-box");
            t[i] = tmid[i] - fac * halfw;
            require_arg(std::abs(eval(nullptr, t.data(), w0.data(), 1e-2)) <=
                            1e-10 * (peak + 1e-300),
                        "amplitude is not supported inside its declared t-box");
        }
    }

    // polynomial-weighted decay along the scaled fast argument
    if (l > 0) {
        const double vmax = 12.0 * std::max(1.0, u_width);
        double inner = 0.0, outer = 0.0;
        std::vector<double> w(l);
        for (int axis = 0; axis < l; ++axis) {
            for (int i = 0; i < 65; ++i) {
                std::fill(w.begin(), w.end(), 0.0);
                const double r = vmax * i / 64.0;
                w[axis] = r;
                const double weighted =
                    std::abs(eval(nullptr, tmid.data(), w.data(), 1e-2)) *
                    std::pow(1.0 + r, 10);
                (r <= 0.75 * vmax ? inner : outer) =
                    std::max(r <= 0.75 * vmax ? inner : outer, weighted);
            }
        }
        require_arg(outer <= inner + 1e-300,
                    "amplitude fails the weighted fast-decay bound");
    }
}

Amplitude gaussian_fiber_amplitude(int K, int l, double t_width, double u_width) {
    require_arg(K >= 0 && l >= 0 && K + l >= 1, "need at least one fiber axis");
    require_arg(t_width > 0.0 && u_width > 0.0, "widths must be positive");
    Amplitude a;
    a.K = K;
    a.l = l;
    a.u_width = u_width;
    const double tb = 8.6 * t_width;
    for (int i = 0; i < K; ++i) a.t_box.push_back({-tb, tb});
    const double tw2 = 2.0 * t_width * t_width, uw2 = 2.0 * u_width * u_width;
    a.eval = [K, l, tw2, uw2, tb](const double*, const double* t, const double* w,
                                  double) {
        double q = 0.0;
        for (int i = 0; i < K; ++i) {
            if (std::abs(t[i]) >= tb) return cdouble(0.0);
            q += t[i] * t[i] / tw2;
        }
        for (int i = 0; i < l; ++i) q += w[i] * w[i] / uw2;
        return cdouble(std::exp(-q), 0.0);
    };
    for (int i = 0; i < K; ++i)
        a.fiber_factors.push_back([tw2, tb](double t) {
            return std::abs(t) >= tb ? cdouble(0.0)
                                     : cdouble(std::exp(-t * t / tw2), 0.0);
        });
    for (int i = 0; i < l; ++i)
        a.fiber_factors.push_back(
            [uw2](double w) { return cdouble(std::exp(-w * w / uw2), 0.0); });
    return a;
}

bool PhaseValidationReport::all_pass() const {
    for (const auto& s : samples)
        if (!s.pass()) return false;
    return !samples.empty();
}

PhaseValidationReport validate_phase(const PhaseFunction& ph,
                                     const std::vector<std::vector<double>>& seeds,
                                     double tol) {
    const int n = ph.n, N = ph.N(), l = ph.l;
    require_arg(N >= 1, "phase has no fiber variables to validate");
    PhaseValidationReport report;
    for (const auto& seed : seeds) {
        require_arg(static_cast<int>(seed.size()) == n + N,
                    "seed dimension mismatch");
        std::vector<double> x(seed.begin(), seed.begin() + n);
        std::vector<double> s(seed.begin() + n, seed.end());
        require_guard(newton_critical(ph, x, s), "no-critical-point",
                      "Newton did not reach the critical set from a seed");

        PhaseSampleCheck chk;
        chk.point = x;
        chk.point.insert(chk.point.end(), s.begin(), s.end());

        // (a) D(d_s f) full rank N
        Eigen::MatrixXd Ja = fd_jacobian_of(ph, x, s, false);
        chk.rank_full = svd_rank(Ja, tol) == N;

        // (b) appending the du rows keeps full rank: the critical manifold
        // meets {u = 0} transversally
        Eigen::MatrixXd Jb(N + l, n + N);
        Jb.topRows(N) = Ja;
        Jb.bottomRows(l).setZero();
        for (int j = 0; j < l; ++j) Jb(N + j, n + ph.K + j) = 1.0;
        chk.model_transverse = svd_rank(Jb, tol) == N + l;

        // (c) (x, d_x f) immerses the sliced critical manifold: apply its
        // differential to a kernel basis of Jb and demand full rank
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(Jb, Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        const double smax = sv.size() ? sv(0) : 0.0;
        int rank = 0;
        for (int i = 0; i < sv.size(); ++i)
            if (sv(i) > tol * (smax + 1e-300)) ++rank;
        const int kdim = n + N - rank;
        if (kdim == 0) {
            chk.immersion = true; // nothing tangent to immerse
        } else {
            Eigen::MatrixXd kernel =
                svd.matrixV().rightCols(kdim); // (n+N) x kdim
            Eigen::MatrixXd M(2 * n, n + N);
            M.setZero();
            for (int i = 0; i < n; ++i) M(i, i) = 1.0;
            M.bottomRows(n) = fd_jacobian_of(ph, x, s, true);
            chk.immersion = svd_rank(M * kernel, tol) == kdim;
        }
        report.samples.push_back(std::move(chk));
    }
    return report;
}

int excess(const CleanIntersectionDims& d) {
    require_arg(d.dim_intersection >= 0 && d.dim_X >= 0 && d.dim_Y >= 0 &&
                    d.dim_Sigma >= 0 && d.dim_Gamma >= 0,
                "dimensions must be nonnegative");
    require_arg(d.dim_Gamma == d.dim_X + d.dim_Y,
                "the relation must be Lagrangian in the product");
    require_arg(d.dim_Sigma <= 2 * d.dim_Y, "Sigma cannot exceed its phase space");
    const int e =
        d.dim_intersection + 2 * d.dim_Y - d.dim_Gamma - d.dim_Sigma;
    require_arg(e >= 0, "dimensions cannot come from a clean intersection");
    return e;
}

namespace {

struct QuadPlan {
    std::vector<QuadAxis> axes;
    std::vector<std::vector<cdouble>> factors; // per axis, per node (may be empty)
};

// u-boxes centered on the critical offset found by Newton (when one exists),
// sized by the scaled profile decay.
QuadPlan build_plan(const PhaseFunction& ph, const Amplitude& a,
                    const std::vector<double>& x, double hbar, int refine) {
    const int K = ph.K, l = ph.l, N = K + l;
    require_arg(static_cast<int>(a.t_box.size()) == K,
                "amplitude t-box must cover every t axis");
    QuadPlan plan;
    plan.axes.resize(std::size_t(N));
    for (int i = 0; i < K; ++i) {
        plan.axes[i].lo = a.t_box[i].first;
        plan.axes[i].hi = a.t_box[i].second;
        require_arg(plan.axes[i].hi > plan.axes[i].lo, "empty t-box");
    }
    if (l > 0) {
        std::vector<double> sc(std::size_t(N), 0.0);
        for (int i = 0; i < K; ++i)
            sc[i] = 0.5 * (a.t_box[i].first + a.t_box[i].second);
        const bool found = newton_critical(ph, x, sc);
        const double reach = 12.0 * std::sqrt(hbar) * a.u_width;
        for (int j = 0; j < l; ++j) {
            const double off = found ? std::abs(sc[K + j]) : 0.0;
            plan.axes[K + j].lo = -(reach + off);
            plan.axes[K + j].hi = reach + off;
        }
    }

    // per-axis node density from the scanned phase gradient
    const int scan = N <= 2 ? 33 : 9;
    std::vector<double> gmax(std::size_t(N), 0.0);
    std::vector<int> idx(std::size_t(N), 0);
    std::vector<double> s(static_cast<std::size_t>(N)), dx(static_cast<std::size_t>(ph.n)),
        ds(static_cast<std::size_t>(N));
    std::size_t total_scan = 1;
    for (int i = 0; i < N; ++i) total_scan *= std::size_t(scan);
    for (std::size_t flat = 0; flat < total_scan; ++flat) {
        std::size_t rem = flat;
        for (int i = N - 1; i >= 0; --i) {
            idx[i] = int(rem % std::size_t(scan));
            rem /= std::size_t(scan);
        }
        for (int i = 0; i < N; ++i)
            s[i] = plan.axes[i].lo +
                   (plan.axes[i].hi - plan.axes[i].lo) * idx[i] / double(scan - 1);
        ph.gradient(x.data(), s.data(), dx.data(), ds.data());
        for (int i = 0; i < N; ++i) gmax[i] = std::max(gmax[i], std::abs(ds[i]));
    }

    double total_nodes = 1.0;
    for (int i = 0; i < N; ++i) {
        const double len = plan.axes[i].hi - plan.axes[i].lo;
        const double freq = 1.1 * gmax[i] / hbar; // rad per unit, padded
        // each 32-node panel spans at most two phase periods
        const double want = std::ceil(len * freq / (4.0 * pi));
        plan.axes[i].panels =
            refine * std::max(1, int(std::min(want, 1e9)));
        total_nodes *= 32.0 * plan.axes[i].panels;
    }
    require_guard(total_nodes <= double(std::uint64_t(1) << 33),
                  "quadrature-resolution",
                  "resolving the phase oscillation needs more nodes than the "
                  "budget allows; increase hbar or shrink the boxes");
    for (auto& ax : plan.axes) fill_axis_nodes(ax);

    // separable amplitudes: tabulate per-axis factors (u factors take the
    // scaled argument)
    if (!a.fiber_factors.empty()) {
        require_arg(static_cast<int>(a.fiber_factors.size()) == N,
                    "separable amplitude must provide one factor per axis");
        const double rth = std::sqrt(hbar);
        plan.factors.resize(std::size_t(N));
        for (int i = 0; i < N; ++i) {
            const auto& ax = plan.axes[i];
            plan.factors[i].resize(ax.pos.size());
            for (std::size_t q = 0; q < ax.pos.size(); ++q) {
                const double arg = i < K ? ax.pos[q] : ax.pos[q] / rth;
                plan.factors[i][q] = a.fiber_factors[i](arg) * ax.wt[q];
            }
        }
    }
    return plan;
}

cdouble quad_recurse(const PhaseFunction& ph, const Amplitude& a,
                     const std::vector<double>& x, double hbar,
                     const QuadPlan& plan, int axis, std::vector<double>& s,
                     std::vector<double>& w);

// one 32-node panel along `axis`, recursing over the remaining axes
cdouble panel_value(const PhaseFunction& ph, const Amplitude& a,
                    const std::vector<double>& x, double hbar,
                    const QuadPlan& plan, int axis, int p,
                    std::vector<double>& s, std::vector<double>& w) {
    const int K = ph.K, N = ph.N();
    const auto& ax = plan.axes[std::size_t(axis)];
    const bool separable = !plan.factors.empty();
    const double rth = std::sqrt(hbar);
    cdouble acc = 0.0;
    for (int q = 0; q < 32; ++q) {
        const std::size_t node = std::size_t(p) * 32 + std::size_t(q);
        s[std::size_t(axis)] = ax.pos[node];
        cdouble fac;
        if (separable)
            fac = plan.factors[std::size_t(axis)][node];
        else
            fac = ax.wt[node];
        if (axis + 1 < N) {
            acc += fac * quad_recurse(ph, a, x, hbar, plan, axis + 1, s, w);
        } else {
            const double f = ph.f(x.data(), s.data());
            cdouble amp;
            if (separable) {
                amp = 1.0;
            } else {
                for (int j = 0; j < ph.l; ++j)
                    w[std::size_t(j)] = s[std::size_t(K + j)] / rth;
                amp = a.eval(x.data(), s.data(), ph.l ? w.data() : nullptr,
                             hbar);
            }
            acc += fac * amp * std::polar(1.0, f / hbar);
        }
    }
    return acc;
}

// deterministic axis-major accumulation: per-axis pairwise over panel sums
cdouble quad_recurse(const PhaseFunction& ph, const Amplitude& a,
                     const std::vector<double>& x, double hbar,
                     const QuadPlan& plan, int axis, std::vector<double>& s,
                     std::vector<double>& w) {
    const auto& ax = plan.axes[std::size_t(axis)];
    std::vector<cdouble> panel_sums(static_cast<std::size_t>(ax.panels));
    for (int p = 0; p < ax.panels; ++p)
        panel_sums[std::size_t(p)] = panel_value(ph, a, x, hbar, plan, axis, p, s, w);
    return pairwise_sum(panel_sums.data(), panel_sums.size());
}

} // namespace

cdouble oscillatory_integral(const PhaseFunction& ph, const Amplitude& a, double r,
                             const std::vector<double>& x, double hbar,
                             int refine) {
    require_arg(hbar > 0.0 && hbar <= 1.0, "hbar must lie in (0, 1]");
    require_arg(static_cast<int>(x.size()) == ph.n, "base point dimension mismatch");
    require_arg(a.K == ph.K && a.l == ph.l, "amplitude fiber split mismatch");
    require_arg(refine >= 1, "refine must be positive");
    const int N = ph.N();
    if (N == 0)
        return std::pow(hbar, r) * std::polar(1.0, ph.f(x.data(), nullptr) / hbar) *
               a.eval(x.data(), nullptr, nullptr, hbar);
    QuadPlan plan = build_plan(ph, a, x, hbar, refine);
    // outermost panels are the parallel tiles; panel_sums keeps the
    // accumulation order fixed regardless of worker count
    const auto& ax0 = plan.axes[0];
    std::vector<cdouble> panel_sums(static_cast<std::size_t>(ax0.panels));
    parallel_for(panel_sums.size(), [&](std::size_t p) {
        std::vector<double> s(static_cast<std::size_t>(N), 0.0),
            w(static_cast<std::size_t>(std::max(ph.l, 1)));
        panel_sums[p] = panel_value(ph, a, x, hbar, plan, 0, int(p), s, w);
    });
    cdouble total = pairwise_sum(panel_sums.data(), panel_sums.size());
    if (!plan.factors.empty() && a.base_factor) total *= a.base_factor(x.data());
    return total * std::pow(hbar, r - 0.5 * N);
}

StationaryPhaseResult stationary_phase_leading(const PhaseFunction& ph,
                                               const Amplitude& a,
                                               const std::vector<double>& x,
                                               double hbar) {
    require_arg(hbar > 0.0 && hbar <= 1.0, "hbar must lie in (0, 1]");
    require_arg(static_cast<int>(x.size()) == ph.n, "base point dimension mismatch");
    require_arg(a.K == ph.K && a.l == ph.l, "amplitude fiber split mismatch");
    const int K = ph.K, l = ph.l, N = ph.N();
    require_arg(N >= 1, "phase has no fiber variables");
    require_arg(static_cast<int>(a.t_box.size()) == K,
                "amplitude t-box must cover every t axis");

    // seed grid over the fiber box
    std::vector<std::pair<double, double>> box(static_cast<std::size_t>(N));
    for (int i = 0; i < K; ++i) box[i] = a.t_box[i];
    const double reach = 12.0 * std::max(std::sqrt(hbar) * a.u_width, 0.1);
    for (int j = 0; j < l; ++j) box[K + j] = {-reach, reach};

    std::vector<std::vector<double>> found;
    const int per_axis = 5;
    std::size_t total = 1;
    for (int i = 0; i < N; ++i) total *= std::size_t(per_axis);
    std::vector<int> idx(static_cast<std::size_t>(N));
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rem = flat;
        for (int i = N - 1; i >= 0; --i) {
            idx[std::size_t(i)] = int(rem % std::size_t(per_axis));
            rem /= std::size_t(per_axis);
        }
        std::vector<double> s(static_cast<std::size_t>(N));
        for (int i = 0; i < N; ++i)
            s[std::size_t(i)] =
                box[std::size_t(i)].first +
                (box[std::size_t(i)].second - box[std::size_t(i)].first) *
                    (idx[std::size_t(i)] + 0.5) / per_axis;
        if (!newton_critical(ph, x, s)) continue;
        bool inside = true;
        for (int i = 0; i < N; ++i) {
            const double span = box[std::size_t(i)].second - box[std::size_t(i)].first;
            if (s[std::size_t(i)] < box[std::size_t(i)].first - 0.25 * span ||
                s[std::size_t(i)] > box[std::size_t(i)].second + 0.25 * span)
                inside = false;
        }
        if (!inside) continue;
        bool dup = false;
        for (const auto& prev : found) {
            double d = 0.0;
            for (int i = 0; i < N; ++i)
                d = std::max(d, std::abs(prev[std::size_t(i)] - s[std::size_t(i)]));
            if (d < 1e-7 * (1.0 + std::abs(s[0]))) dup = true;
        }
        if (!dup) found.push_back(std::move(s));
    }

    StationaryPhaseResult out;
    const double rth = std::sqrt(hbar);
    std::vector<double> dx(static_cast<std::size_t>(ph.n)), ds(static_cast<std::size_t>(N));
    for (const auto& sc : found) {
        std::vector<double> wc(static_cast<std::size_t>(std::max(l, 1)));
        for (int j = 0; j < l; ++j) wc[std::size_t(j)] = sc[std::size_t(K + j)] / rth;
        const cdouble amp =
            a.eval(x.data(), sc.data(), l ? wc.data() : nullptr, hbar);
        if (std::abs(amp) == 0.0) continue; // outside the amplitude support

        // fiber Hessian by central differences of the gradient
        Eigen::MatrixXd H(N, N);
        std::vector<double> sp(sc), d2(static_cast<std::size_t>(N));
        for (int v = 0; v < N; ++v) {
            const double c0 = sp[std::size_t(v)], h = fd_step(c0);
            sp[std::size_t(v)] = c0 + h;
            ph.gradient(x.data(), sp.data(), dx.data(), d2.data());
            for (int rr = 0; rr < N; ++rr) H(rr, v) = d2[std::size_t(rr)];
            sp[std::size_t(v)] = c0 - h;
            ph.gradient(x.data(), sp.data(), dx.data(), d2.data());
            for (int rr = 0; rr < N; ++rr)
                H(rr, v) = (H(rr, v) - d2[std::size_t(rr)]) / (2.0 * h);
            sp[std::size_t(v)] = c0;
        }
        H = 0.5 * (H + H.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H);
        const auto& ev = eig.eigenvalues();
        double amax = 0.0, amin = std::numeric_limits<double>::infinity();
        double det = 1.0;
        int sigma = 0;
        for (int i = 0; i < N; ++i) {
            amax = std::max(amax, std::abs(ev(i)));
            amin = std::min(amin, std::abs(ev(i)));
            det *= ev(i);
            sigma += ev(i) > 0.0 ? 1 : -1;
        }
        const double cond = amin > 0.0 ? amax / amin
                                       : std::numeric_limits<double>::infinity();
        require_guard(amin > 1e-10 * std::max(1.0, amax) && cond < 1e8,
                      "degenerate-critical-point",
                      "stationary point has a degenerate fiber Hessian");
        out.hessian_cond = std::max(out.hessian_cond, cond);
        out.critical_points += 1;
        const double fval = ph.f(x.data(), sc.data());
        out.value += std::pow(2.0 * pi * hbar, 0.5 * N) /
                     std::sqrt(std::abs(det)) *
                     std::polar(1.0, 0.25 * pi * sigma + fval / hbar) * amp;
    }
    if (out.critical_points == 0) {
        out.rapidly_decaying = true;
        out.value = 0.0;
    }
    return out;
}

SampledField pushforward(const SampledField& field, int x_dims) {
    field.check();
    const int d = field.grid.dim();
    require_arg(x_dims >= 1 && x_dims < d,
                "base/fiber axis partition is invalid");
    std::vector<AxisSpec> base_axes(field.grid.axes().begin(),
                                    field.grid.axes().begin() + x_dims);
    SampledField out(GridSpec(std::move(base_axes)), field.hbar);
    out.warnings = field.warnings;

    std::size_t block = 1;
    double vol = 1.0;
    for (int a = x_dims; a < d; ++a) {
        block *= std::size_t(field.grid.axis(a).m);
        vol *= field.grid.spacing(a);
    }
    // fiber quadrature weights, laid out to match the contiguous fiber block
    std::vector<double> fw(block, 1.0);
    std::vector<int> idx(std::size_t(d - x_dims), 0);
    for (std::size_t j = 0; j < block; ++j) {
        std::size_t rem = j;
        for (int a = d - 1; a >= x_dims; --a) {
            idx[std::size_t(a - x_dims)] = int(rem % std::size_t(field.grid.axis(a).m));
            rem /= std::size_t(field.grid.axis(a).m);
        }
        for (int a = x_dims; a < d; ++a)
            fw[j] *= field.grid.node_weight(a, idx[std::size_t(a - x_dims)]);
    }

    std::vector<cdouble> scratch(block);
    for (std::size_t b = 0; b < out.grid.size(); ++b) {
        const cdouble* slice = field.values.data() + b * block;
        for (std::size_t j = 0; j < block; ++j) scratch[j] = slice[j] * fw[j];
        out.values[b] = pairwise_sum(scratch.data(), block) * vol;
    }
    out.check();
    return out;
}

} // namespace isotropica
