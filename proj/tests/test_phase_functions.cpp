#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "isotropica/errors.hpp"
#include "isotropica/grid.hpp"
#include "isotropica/phase.hpp"

using namespace isotropica;

namespace {

constexpr double pi = std::numbers::pi;

PhaseFunction quadratic_fiber_phase(double c) {
    PhaseFunction ph;
    ph.n = 1;
    ph.K = 1;
    ph.l = 0;
    ph.name = "quadratic";
    ph.f = [c](const double*, const double* s) { return 0.5 * c * s[0] * s[0]; };
    ph.grad = [c](const double*, const double* s, double* dx, double* ds) {
        dx[0] = 0.0;
        ds[0] = c * s[0];
    };
    return ph;
}

// max |analytic - finite difference| gradient deviation over random points
double gradient_fd_gap(const PhaseFunction& ph, int npts, unsigned seed) {
    REQUIRE(bool(ph.grad));
    PhaseFunction numeric = ph;
    numeric.grad = nullptr;
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    const int n = ph.n, N = ph.N();
    std::vector<double> x(n), s(N), dxa(n), dsa(N), dxn(n), dsn(N);
    double worst = 0.0;
    for (int p = 0; p < npts; ++p) {
        for (auto& v : x) v = U(rng);
        for (auto& v : s) v = U(rng);
        ph.gradient(x.data(), s.data(), dxa.data(), dsa.data());
        numeric.gradient(x.data(), s.data(), dxn.data(), dsn.data());
        for (int i = 0; i < n; ++i) worst = std::max(worst, std::abs(dxa[i] - dxn[i]));
        for (int i = 0; i < N; ++i) worst = std::max(worst, std::abs(dsa[i] - dsn[i]));
    }
    return worst;
}

std::vector<std::vector<double>> random_seeds(int count, int dim, unsigned seed,
                                              double span = 1.5) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> U(-span, span);
    std::vector<std::vector<double>> out;
    for (int i = 0; i < count; ++i) {
        std::vector<double> pt(dim);
        for (auto& v : pt) v = U(rng);
        out.push_back(std::move(pt));
    }
    return out;
}

double exact_model_integral(double r, double x2, double hb, double tw, double uw) {
    const double denom = hb / (tw * tw) + uw * uw;
    return std::pow(hb, r) * 2.0 * pi * uw / std::sqrt(denom) *
           std::exp(-x2 * x2 / (2.0 * hb * denom));
}

double rel_diff(cdouble a, cdouble b) { return std::abs(a - b) / std::abs(b); }

} // namespace

TEST_CASE("analytic gradients agree with finite differences") {
    CHECK(gradient_fd_gap(model_phase(1, 1), 100, 11) < 1e-8);
    CHECK(gradient_fd_gap(model_phase(2, 2), 25, 12) < 1e-6);
    CHECK(gradient_fd_gap(model_phase(3, 1), 25, 13) < 1e-6);
    CHECK(gradient_fd_gap(fold_phase(), 25, 14) < 1e-6);
    CHECK(gradient_fd_gap(identity_relation_phase(1), 25, 15) < 1e-6);
    CHECK(gradient_fd_gap(identity_relation_phase(3), 25, 16) < 1e-6);
    CHECK(gradient_fd_gap(fourier_pairing_phase(2), 25, 17) < 1e-6);
    const PhaseFunction composed_id =
        compose_phase(model_phase(1, 1), identity_relation_phase(2), 2);
    const PhaseFunction composed_fp =
        compose_phase(model_phase(1, 1), fourier_pairing_phase(2), 2);
    CHECK(bool(composed_id.grad));
    CHECK(bool(composed_fp.grad));
    CHECK(gradient_fd_gap(composed_id, 25, 18) < 1e-6);
    CHECK(gradient_fd_gap(composed_fp, 25, 19) < 1e-6);
}

TEST_CASE("model phase is the expected bilinear form") {
    const PhaseFunction ph = model_phase(1, 1);
    CHECK(ph.n == 2);
    CHECK(ph.K == 1);
    CHECK(ph.l == 1);
    CHECK(ph.N() == 2);
    const double x[2] = {0.7, 1.3};
    const double s[2] = {0.4, 0.2}; // (t, u)
    CHECK(ph.eval(x, s) == doctest::Approx(0.4 * 1.1).epsilon(1e-14));
    double dx[2], ds[2];
    ph.gradient(x, s, dx, ds);
    CHECK(dx[0] == 0.0);
    CHECK(dx[1] == doctest::Approx(0.4));
    CHECK(ds[0] == doctest::Approx(1.1));
    CHECK(ds[1] == doctest::Approx(-0.4));

    // t-derivative vanishes where u matches the fast coordinates
    const double s_crit[2] = {0.4, 1.3};
    ph.gradient(x, s_crit, dx, ds);
    CHECK(std::abs(ds[0]) < 1e-15);

    const PhaseFunction ph2 = model_phase(0, 2);
    const double y[2] = {0.3, -0.2};
    const double s2[4] = {1.0, 2.0, 0.1, 0.5};
    CHECK(ph2.eval(y, s2) ==
          doctest::Approx(1.0 * (0.3 - 0.1) + 2.0 * (-0.2 - 0.5)).epsilon(1e-14));

    CHECK_THROWS_AS(model_phase(1, 0), std::invalid_argument);
    CHECK_THROWS_AS(model_phase(-1, 1), std::invalid_argument);
}

TEST_CASE("validation passes across the model family and locates its critical set") {
    for (int k = 1; k <= 3; ++k) {
        for (int l = 1; l <= 3; ++l) {
            const PhaseFunction ph = model_phase(k, l);
            const auto seeds = random_seeds(8, ph.n + ph.N(), 100u + 10u * k + l);
            const auto report = validate_phase(ph, seeds);
            INFO("k=", k, " l=", l);
            CHECK(report.all_pass());
            CHECK(report.samples.size() == seeds.size());
            for (const auto& smp : report.samples) {
                // refined points satisfy t = 0, u = x''
                for (int j = 0; j < l; ++j) {
                    const double t = smp.point[k + l + j];
                    const double u = smp.point[k + l + l + j];
                    const double xf = smp.point[k + j];
                    CHECK(std::abs(t) < 1e-9);
                    CHECK(std::abs(u - xf) < 1e-9);
                }
            }
        }
    }
}

TEST_CASE("fold phase degenerates exactly at the caustic point") {
    const PhaseFunction ph = fold_phase();
    const auto report = validate_phase(ph, {{0.0, 0.7}, {0.0, -0.4}});
    for (const auto& smp : report.samples) {
        CHECK_FALSE(smp.rank_full);
        CHECK_FALSE(smp.pass());
    }
    CHECK_FALSE(report.all_pass());

    // away from x = 0 the fiber gradient x^2 never vanishes
    try {
        validate_phase(ph, {{0.5, 0.3}});
        FAIL("expected a guard refusal");
    } catch (const guard_error& e) {
        CHECK(e.guard() == "no-critical-point");
    }
}

TEST_CASE("composition bookkeeping and validity") {
    const PhaseFunction mp = model_phase(1, 1);
    const PhaseFunction idg = identity_relation_phase(2);
    const PhaseFunction F = compose_phase(mp, idg, 2);
    CHECK(F.n == 2);
    CHECK(F.l == 1);
    CHECK(F.N() == mp.n + idg.N() + mp.N());
    CHECK(F.N() == 6);

    CHECK_THROWS_AS(compose_phase(model_phase(2, 1), idg, 2), std::invalid_argument);
    CHECK_THROWS_AS(compose_phase(mp, mp, 1), std::invalid_argument);
    CHECK_THROWS_AS(compose_phase(mp, idg, 4), std::invalid_argument);

    // composed with the identity-relation graph: valid, and the critical set
    // is {x = y, s = 0, t = 0, u = y''} with vanishing y-gradient
    const auto seeds = random_seeds(6, F.n + F.N(), 500, 1.0);
    const auto report = validate_phase(F, seeds);
    CHECK(report.all_pass());
    for (const auto& smp : report.samples) {
        const double y1 = smp.point[0], y2 = smp.point[1];
        CHECK(std::abs(smp.point[2] - y1) < 1e-7); // x1
        CHECK(std::abs(smp.point[3] - y2) < 1e-7); // x2
        CHECK(std::abs(smp.point[4]) < 1e-7);      // s1
        CHECK(std::abs(smp.point[5]) < 1e-7);      // s2
        CHECK(std::abs(smp.point[6]) < 1e-7);      // t
        CHECK(std::abs(smp.point[7] - y2) < 1e-7); // u
        std::vector<double> dy(2), dS(6);
        F.gradient(smp.point.data(), smp.point.data() + 2, dy.data(), dS.data());
        CHECK(std::abs(dy[0]) < 1e-7);
        CHECK(std::abs(dy[1]) < 1e-7);
    }

    // composed with the Fourier pairing: critical points exist only over the
    // origin of the new base
    const PhaseFunction F2 = compose_phase(mp, fourier_pairing_phase(2), 2);
    CHECK(F2.N() == 4);
    auto seeds2 = random_seeds(6, F2.n + F2.N(), 600, 1.0);
    for (auto& sd : seeds2) sd[0] = sd[1] = 0.0;
    const auto report2 = validate_phase(F2, seeds2);
    CHECK(report2.all_pass());
    for (const auto& smp : report2.samples) {
        CHECK(std::abs(smp.point[4]) < 1e-8);                // t
        CHECK(std::abs(smp.point[5] - smp.point[3]) < 1e-8); // u = x2
    }
    try {
        validate_phase(F2, {{0.4, -0.3, 0.1, 0.2, 0.05, 0.1}});
        FAIL("expected a guard refusal");
    } catch (const guard_error& e) {
        CHECK(e.guard() == "no-critical-point");
    }
}

TEST_CASE("excess dimension count") {
    CleanIntersectionDims d;
    d.dim_intersection = 0;
    d.dim_X = 1;
    d.dim_Y = 1;
    d.dim_Sigma = 0;
    d.dim_Gamma = 2;
    CHECK(excess(d) == 0);

    d.dim_intersection = 1;
    CHECK(excess(d) == 1);

    d.dim_intersection = 0;
    d.dim_Sigma = 2;
    CHECK_THROWS_AS(excess(d), std::invalid_argument); // e would be -2

    d.dim_Sigma = 0;
    d.dim_Gamma = 3;
    CHECK_THROWS_AS(excess(d), std::invalid_argument); // not Lagrangian dims

    // dimension-count identity: intersections cut out by N + dimY - 2l - m
    // constraints on top of the graph satisfy e = N + dimY - (l + m)
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> dimxy(1, 4), extra(0, 3);
    int accepted = 0;
    while (accepted < 20) {
        const int dimX = dimxy(rng), dimY = dimxy(rng);
        std::uniform_int_distribution<int> lpick(0, dimY);
        const int l = lpick(rng);
        const int N = l + extra(rng);
        std::uniform_int_distribution<int> mpick(0, N + dimY - l);
        const int m = mpick(rng);
        const int dimI = dimX + dimY + N - 2 * l - m;
        if (dimI < 0) continue;
        CleanIntersectionDims t;
        t.dim_intersection = dimI;
        t.dim_X = dimX;
        t.dim_Y = dimY;
        t.dim_Sigma = dimY - l;
        t.dim_Gamma = dimX + dimY;
        CHECK(excess(t) == N + dimY - (l + m));
        ++accepted;
    }
}

TEST_CASE("oscillatory integral closed forms and guards") {
    const PhaseFunction quad = quadratic_fiber_phase(1.0);
    const std::vector<double> x0 = {0.0};

    SUBCASE("zero amplitude integrates to zero") {
        Amplitude zero;
        zero.K = 1;
        zero.l = 0;
        zero.t_box = {{-1.0, 1.0}};
        zero.eval = [](const double*, const double*, const double*, double) {
            return cdouble(0.0);
        };
        CHECK(std::abs(oscillatory_integral(quad, zero, 0.7, x0, 1e-2)) == 0.0);
    }

    SUBCASE("order parameter scales the prefactor exactly") {
        const Amplitude a = gaussian_fiber_amplitude(1, 0, 1.0, 1.0);
        const cdouble lo = oscillatory_integral(quad, a, 0.25, x0, 1e-3);
        const cdouble hi = oscillatory_integral(quad, a, 1.25, x0, 1e-3);
        CHECK(std::abs(hi - 1e-3 * lo) <= 1e-12 * std::abs(hi));
    }

    SUBCASE("gaussian fiber integral matches its closed form") {
        const PhaseFunction mp = model_phase(1, 1);
        const Amplitude a = gaussian_fiber_amplitude(1, 1, 1.0, 1.0);
        const double hb = 0.025, x2 = 0.6 * std::sqrt(hb);
        const std::vector<double> x = {0.4, x2};
        const cdouble got = oscillatory_integral(mp, a, 0.3, x, hb);
        const double want = exact_model_integral(0.3, x2, hb, 1.0, 1.0);
        CHECK(rel_diff(got, want) < 1e-8);
        const cdouble finer = oscillatory_integral(mp, a, 0.3, x, hb, 2);
        CHECK(rel_diff(got, finer) < 1e-10);
    }

    SUBCASE("fiberless phases reduce to a pointwise formula") {
        const PhaseFunction fp = fourier_pairing_phase(1);
        Amplitude a;
        a.K = 0;
        a.l = 0;
        a.eval = [](const double* x, const double*, const double*, double) {
            return cdouble(x[0] + 2.0 * x[1]);
        };
        const std::vector<double> x = {0.3, -0.7};
        const cdouble got = oscillatory_integral(fp, a, 0.5, x, 0.01);
        const cdouble want = std::sqrt(0.01) *
                             std::polar(1.0, -0.3 * -0.7 / 0.01) * (0.3 - 1.4);
        CHECK(std::abs(got - want) < 1e-14 * std::abs(want));
    }

    SUBCASE("node budget guard refuses unresolvable oscillation") {
        const PhaseFunction mp = model_phase(1, 1);
        const Amplitude a = gaussian_fiber_amplitude(1, 1, 1.0, 1.0);
        try {
            oscillatory_integral(mp, a, 0.0, {0.0, 1e-4}, 1e-8);
            FAIL("expected a guard refusal");
        } catch (const guard_error& e) {
            CHECK(e.guard() == "quadrature-resolution");
        }
    }

    SUBCASE("parameter validation") {
        const Amplitude a = gaussian_fiber_amplitude(1, 0, 1.0, 1.0);
        CHECK_THROWS_AS(oscillatory_integral(quad, a, 0.0, x0, -0.1),
                        std::invalid_argument);
        CHECK_THROWS_AS(oscillatory_integral(quad, a, 0.0, {0.0, 1.0}, 0.1),
                        std::invalid_argument);
        const Amplitude b = gaussian_fiber_amplitude(2, 0, 1.0, 1.0);
        CHECK_THROWS_AS(oscillatory_integral(quad, b, 0.0, x0, 0.1),
                        std::invalid_argument);
        CHECK_THROWS_AS(oscillatory_integral(quad, a, 0.0, x0, 0.1, 0),
                        std::invalid_argument);
    }
}

TEST_CASE("deep-regime oscillatory integral reproduces the leading profile") {
    // t-Gaussian truncated at |t| = 5 (truncation ~4e-5, far below tolerance)
    Amplitude a;
    a.K = 1;
    a.l = 1;
    a.t_box = {{-5.0, 5.0}};
    a.u_width = 1.0;
    a.eval = [](const double*, const double* t, const double* w, double) {
        if (std::abs(t[0]) >= 5.0) return cdouble(0.0);
        return cdouble(std::exp(-0.5 * t[0] * t[0] - 0.5 * w[0] * w[0]), 0.0);
    };
    a.fiber_factors = {
        [](double t) {
            return std::abs(t) >= 5.0 ? cdouble(0.0)
                                      : cdouble(std::exp(-0.5 * t * t), 0.0);
        },
        [](double w) { return cdouble(std::exp(-0.5 * w * w), 0.0); }};

    const PhaseFunction mp = model_phase(1, 1);
    const cdouble got = oscillatory_integral(mp, a, 0.0, {0.2, 0.0}, 1e-4);
    CHECK(std::abs(got - 2.0 * pi) < 0.02 * 2.0 * pi);
}

TEST_CASE("stationary phase leading term") {
    const PhaseFunction quad = quadratic_fiber_phase(1.0);
    const Amplitude a1 = gaussian_fiber_amplitude(1, 0, 1.0, 1.0);
    const std::vector<double> x0 = {0.0};

    SUBCASE("quadratic phase: exact value and quadrature agreement") {
        const double hb = 1e-3;
        const auto spa = stationary_phase_leading(quad, a1, x0, hb);
        CHECK(spa.critical_points == 1);
        CHECK_FALSE(spa.rapidly_decaying);
        const cdouble lead = std::sqrt(2.0 * pi * hb) * std::polar(1.0, pi / 4.0);
        CHECK(rel_diff(spa.value, lead) < 1e-9);

        // r = N/2 makes the quadrature prefactor 1, directly comparable
        const cdouble full = oscillatory_integral(quad, a1, 0.5, x0, hb);
        const cdouble alpha(0.5, -0.5 / hb);
        const cdouble exact = std::sqrt(pi / alpha);
        CHECK(rel_diff(full, exact) < 1e-9);
        const double gap = rel_diff(full, spa.value);
        CHECK(gap < 0.005); // leading-order error is ~hbar/2
        CHECK(gap > 1e-4);
    }

    SUBCASE("signature flips with the sign of the phase") {
        const PhaseFunction quadm = quadratic_fiber_phase(-1.0);
        const auto plus = stationary_phase_leading(quad, a1, x0, 1e-3);
        const auto minus = stationary_phase_leading(quadm, a1, x0, 1e-3);
        CHECK(rel_diff(minus.value, std::conj(plus.value)) < 1e-9);
        CHECK(std::arg(plus.value) == doctest::Approx(pi / 4.0).epsilon(1e-8));
        CHECK(std::arg(minus.value) == doctest::Approx(-pi / 4.0).epsilon(1e-8));
    }

    SUBCASE("deep-regime cross-check against full quadrature") {
        const PhaseFunction mp = model_phase(1, 1);
        const Amplitude a = gaussian_fiber_amplitude(1, 1, 0.5, 0.5);
        const double hb = 1e-4;
        const std::vector<double> x = {0.3, 0.5 * std::sqrt(hb)};
        const auto spa = stationary_phase_leading(mp, a, x, hb);
        CHECK(spa.critical_points == 1);
        // saddle at (t, u) = (0, x''), unit determinant, zero signature
        const cdouble lead = 2.0 * pi * hb * std::exp(-0.5);
        CHECK(rel_diff(spa.value, lead) < 1e-8);
        const cdouble full = oscillatory_integral(mp, a, 1.0, x, hb);
        CHECK(rel_diff(full, spa.value) < 1e-3);
    }

    SUBCASE("no stationary point inside the support") {
        Amplitude bump;
        bump.K = 1;
        bump.l = 0;
        bump.t_box = {{1.0, 2.0}};
        bump.eval = [](const double*, const double* t, const double*, double) {
            const double tau = (t[0] - 1.5) / 0.5;
            if (std::abs(tau) >= 1.0) return cdouble(0.0);
            return cdouble(std::exp(-1.0 / (1.0 - tau * tau)), 0.0);
        };
        const auto res = stationary_phase_leading(quad, bump, x0, 1e-3);
        CHECK(res.rapidly_decaying);
        CHECK(res.critical_points == 0);
        CHECK(std::abs(res.value) == 0.0);
    }

    SUBCASE("degenerate critical manifold raises the guard") {
        PhaseFunction flat;
        flat.n = 1;
        flat.K = 2;
        flat.l = 0;
        flat.f = [](const double*, const double* s) { return 0.5 * s[0] * s[0]; };
        flat.grad = [](const double*, const double* s, double* dx, double* ds) {
            dx[0] = 0.0;
            ds[0] = s[0];
            ds[1] = 0.0;
        };
        const Amplitude a2 = gaussian_fiber_amplitude(2, 0, 1.0, 1.0);
        try {
            stationary_phase_leading(flat, a2, x0, 1e-3);
            FAIL("expected a guard refusal");
        } catch (const guard_error& e) {
            CHECK(e.guard() == "degenerate-critical-point");
        }
    }

    SUBCASE("ill-conditioned Hessian raises the guard") {
        PhaseFunction skew;
        skew.n = 1;
        skew.K = 2;
        skew.l = 0;
        skew.f = [](const double*, const double* s) {
            return 0.5 * s[0] * s[0] + 2.5e-10 * s[1] * s[1];
        };
        skew.grad = [](const double*, const double* s, double* dx, double* ds) {
            dx[0] = 0.0;
            ds[0] = s[0];
            ds[1] = 5e-10 * s[1];
        };
        const Amplitude a2 = gaussian_fiber_amplitude(2, 0, 1.0, 1.0);
        try {
            stationary_phase_leading(skew, a2, x0, 1e-3);
            FAIL("expected a guard refusal");
        } catch (const guard_error& e) {
            CHECK(e.guard() == "degenerate-critical-point");
        }
    }
}

TEST_CASE("pushforward integrates out fiber axes") {
    SUBCASE("separable integrand factorizes") {
        GridSpec g({AxisSpec{-2.0, 2.0, 41, false}, AxisSpec{0.0, 2.0 * pi, 64, true}});
        SampledField f(g, 1.0);
        std::vector<double> pt(2);
        for (std::size_t i = 0; i < g.size(); ++i) {
            g.coords(i, pt.data());
            f.values[i] = std::exp(-pt[0] * pt[0]) * std::exp(std::cos(pt[1]));
        }
        const SampledField out = pushforward(f, 1);
        CHECK(out.grid.dim() == 1);
        CHECK(out.grid.size() == 41);
        const double ring = 2.0 * pi * std::cyl_bessel_i(0.0, 1.0);
        for (std::size_t i = 0; i < out.grid.size(); ++i) {
            const double xv = out.grid.point(0, int(i));
            CHECK(std::abs(out.values[i] - std::exp(-xv * xv) * ring) <
                  1e-12 * ring);
        }
    }

    SUBCASE("fiber-constant field scales by fiber length") {
        GridSpec g({AxisSpec{-1.0, 1.0, 21, false}, AxisSpec{0.0, 2.0 * pi, 16, true}});
        SampledField f(g, 0.5);
        std::vector<double> pt(2);
        for (std::size_t i = 0; i < g.size(); ++i) {
            g.coords(i, pt.data());
            f.values[i] = cdouble(pt[0], 0.5);
        }
        const SampledField out = pushforward(f, 1);
        for (std::size_t i = 0; i < out.grid.size(); ++i) {
            const double xv = out.grid.point(0, int(i));
            CHECK(std::abs(out.values[i] - cdouble(xv, 0.5) * (2.0 * pi)) < 1e-13);
        }
        CHECK(out.hbar == 0.5);
    }

    SUBCASE("two fiber axes integrate jointly") {
        GridSpec g({AxisSpec{-1.0, 1.0, 21, false}, AxisSpec{0.0, 2.0 * pi, 32, true},
                    AxisSpec{0.0, 2.0 * pi, 32, true}});
        SampledField f(g, 1.0);
        std::vector<double> pt(3);
        for (std::size_t i = 0; i < g.size(); ++i) {
            g.coords(i, pt.data());
            f.values[i] =
                std::sin(pt[0]) * std::exp(std::cos(pt[1])) * std::exp(std::sin(pt[2]));
        }
        const SampledField out = pushforward(f, 1);
        const double ring = 2.0 * pi * std::cyl_bessel_i(0.0, 1.0);
        for (std::size_t i = 0; i < out.grid.size(); ++i) {
            const double xv = out.grid.point(0, int(i));
            CHECK(std::abs(out.values[i] - std::sin(xv) * ring * ring) <
                  1e-11 * ring * ring);
        }
    }

    SUBCASE("axis partition is validated") {
        GridSpec g({AxisSpec{-1.0, 1.0, 4, false}, AxisSpec{-1.0, 1.0, 4, false}});
        SampledField f(g, 1.0);
        CHECK_THROWS_AS(pushforward(f, 0), std::invalid_argument);
        CHECK_THROWS_AS(pushforward(f, 2), std::invalid_argument);
    }

    SUBCASE("sampled oscillatory integrand agrees with direct quadrature") {
        const double hb = 0.1, tw = 0.5, uw = 0.5;
        GridSpec g({AxisSpec{-0.1, 0.1, 3, false}, AxisSpec{-4.3, 4.3, 1025, false},
                    AxisSpec{-2.1, 2.1, 1025, false}});
        SampledField f(g, hb);
        std::vector<double> pt(3);
        for (std::size_t i = 0; i < g.size(); ++i) {
            g.coords(i, pt.data());
            const double x2 = pt[0], t = pt[1], u = pt[2];
            const double w = u / std::sqrt(hb);
            f.values[i] = std::polar(1.0, t * (x2 - u) / hb) *
                          std::exp(-0.5 * t * t / (tw * tw) -
                                   0.5 * w * w / (uw * uw));
        }
        const SampledField out = pushforward(f, 1);

        const PhaseFunction mp = model_phase(1, 1);
        const Amplitude a = gaussian_fiber_amplitude(1, 1, tw, uw);
        for (std::size_t i = 0; i < out.grid.size(); ++i) {
            const double x2 = out.grid.point(0, int(i));
            const cdouble want = oscillatory_integral(mp, a, 1.0, {0.7, x2}, hb);
            CHECK(rel_diff(out.values[i], want) < 0.02);
        }
    }
}

TEST_CASE("amplitude declarations are verified by sampling") {
    CHECK_NOTHROW(gaussian_fiber_amplitude(1, 1, 1.0, 1.0).check());
    CHECK_NOTHROW(gaussian_fiber_amplitude(2, 0, 0.5, 1.0).check());
    CHECK_NOTHROW(gaussian_fiber_amplitude(0, 2, 1.0, 2.0).check());

    SUBCASE("support leaking past the declared box is rejected") {
        Amplitude leaky;
        leaky.K = 1;
        leaky.l = 0;
        leaky.t_box = {{-1.0, 1.0}};
        leaky.eval = [](const double*, const double* t, const double*, double) {
            return cdouble(std::exp(-0.5 * t[0] * t[0]), 0.0);
        };
        CHECK_THROWS_AS(leaky.check(), std::invalid_argument);
    }

    SUBCASE("slow decay in the scaled fast argument is rejected") {
        Amplitude heavy;
        heavy.K = 0;
        heavy.l = 1;
        heavy.u_width = 1.0;
        heavy.eval = [](const double*, const double*, const double* w, double) {
            return cdouble(1.0 / (1.0 + w[0] * w[0]), 0.0);
        };
        CHECK_THROWS_AS(heavy.check(), std::invalid_argument);
    }

    SUBCASE("t-box arity must match") {
        Amplitude bad;
        bad.K = 1;
        bad.l = 0;
        bad.eval = [](const double*, const double*, const double*, double) {
            return cdouble(1.0);
        };
        CHECK_THROWS_AS(bad.check(), std::invalid_argument);
    }
}
