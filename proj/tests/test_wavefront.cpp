#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "isotropica/catalog.hpp"
#include "isotropica/fourier.hpp"
#include "isotropica/grid.hpp"
#include "isotropica/states.hpp"
#include "isotropica/wavefront.hpp"

using namespace isotropica;

namespace {

constexpr double pi = std::numbers::pi;

Profile gaussian_profile() {
    Profile p;
    p.envelope.kind = Envelope::Kind::one;
    p.shape.kind = ScalarShape::Kind::gaussian;
    p.shape.width = 1.0;
    return p;
}

// k = 1 state with a unit-width gaussian envelope along x' and a unit-width
// gaussian fast factor along x''
ModelIsotropicState enveloped_state() {
    ModelIsotropicState st;
    st.k = 1;
    st.l = 1;
    Profile p = gaussian_profile();
    p.envelope.kind = Envelope::Kind::gaussian;
    p.envelope.center = 0.0;
    p.envelope.width = 1.0;
    st.terms.push_back(p);
    return st;
}

GridSpec box1(double lo, double hi, int m) {
    return make_box_grid({lo}, {hi}, {m});
}

PhaseSpaceGrid psg1(double xlo, double xhi, int mx, double klo, double khi,
                    int mk) {
    PhaseSpaceGrid g;
    g.position = box1(xlo, xhi, mx);
    g.momentum = box1(klo, khi, mk);
    return g;
}

// quadrature weight of one phase-space node
double node_mass_weight(const PhaseSpaceGrid& g, std::size_t ip, std::size_t iq) {
    std::vector<int> idx(static_cast<std::size_t>(g.dim()));
    double w = 1.0;
    g.position.unflatten(ip, idx.data());
    for (int a = 0; a < g.dim(); ++a)
        w *= g.position.node_weight(a, idx[std::size_t(a)]) * g.position.spacing(a);
    g.momentum.unflatten(iq, idx.data());
    for (int a = 0; a < g.dim(); ++a)
        w *= g.momentum.node_weight(a, idx[std::size_t(a)]) * g.momentum.spacing(a);
    return w;
}

} // namespace

TEST_CASE("fbi transform reproduces a matched gaussian packet") {
    const double hb = 1e-2;
    const GridSpec g = box1(-1.5, 2.1, 721);
    const CoherentState st = gaussian_coherent({0.3}, {-0.4});
    SampledField f = sample_coherent_state(st, g, hb);
    const double nrm = field_l2_norm(f);
    for (auto& v : f.values) v /= nrm;

    const PhaseSpaceGrid psg = psg1(0.0, 0.6, 13, -0.7, -0.1, 13);
    const HusimiField h = fbi_transform(f, psg);
    CHECK(h.warnings.empty());

    const double center = h.at(6, 6);
    CHECK(std::abs(center - 1.0) < 1e-6);
    CHECK(h.max_value() == center);
    // nearest neighbors sit at exp(-0.125) of the peak
    for (double v : {h.at(5, 6), h.at(7, 6), h.at(6, 5), h.at(6, 7)}) {
        CHECK(v < 0.9 * center);
        CHECK(v > 0.8 * center);
    }

    // half-max set is a single cluster of radius O(sqrt(hbar)) at the center
    const auto pts = concentration_set(h, 0.5);
    REQUIRE(!pts.empty());
    bool has_center = false;
    for (const auto& p : pts) {
        REQUIRE(p.size() == 2);
        CHECK(std::hypot(p[0] - 0.3, p[1] + 0.4) <= 2.0 * std::sqrt(hb));
        if (std::abs(p[0] - 0.3) < 1e-12 && std::abs(p[1] + 0.4) < 1e-12)
            has_center = true;
    }
    CHECK(has_center);

    CHECK_THROWS_AS((void)concentration_set(h, 0.0), std::invalid_argument);
    CHECK_THROWS_AS((void)concentration_set(h, 1.0), std::invalid_argument);
    CHECK_THROWS_AS((void)concentration_set(h, -0.2), std::invalid_argument);

    // coarse phase-space sampling is flagged
    const HusimiField hc = fbi_transform(f, psg1(0.0, 0.6, 3, -0.7, -0.1, 3));
    CHECK(!hc.warnings.empty());
}

TEST_CASE("total husimi mass matches the packet norm across hbar") {
    for (double hb : {1e-2, 1e-3}) {
        const double rt = std::sqrt(hb);
        const GridSpec g = box1(0.3 - 15.0 * rt, 0.3 + 15.0 * rt, 801);
        const CoherentState st = gaussian_coherent({0.3}, {-0.4});
        const SampledField f = sample_coherent_state(st, g, hb);
        const double n2 = field_l2_norm(f) * field_l2_norm(f);

        const PhaseSpaceGrid psg = psg1(0.3 - 10.0 * rt, 0.3 + 10.0 * rt, 51,
                                        -0.4 - 10.0 * rt, -0.4 + 10.0 * rt, 51);
        const HusimiField h = fbi_transform(f, psg);
        const double expected = 2.0 * pi * hb * n2;
        CHECK(std::abs(h.total_mass() - expected) < 1e-6 * expected);
    }
}

TEST_CASE("fast gaussian state keeps its mass inside the sqrt-hbar tube") {
    const double hb = 1e-2;
    ModelIsotropicState st;
    st.k = 0;
    st.l = 1;
    st.terms.push_back(gaussian_profile());

    const GridSpec g = box1(-2.6, 2.6, 1041);
    const SampledField f = sample_model_state(st, g, hb);

    const PhaseSpaceGrid psg = psg1(-1.4, 1.4, 57, -1.4, 1.4, 57);
    const HusimiField h = fbi_transform(f, psg);
    CHECK(h.warnings.empty());

    const double lim = 10.0 * std::sqrt(hb) + 1e-12;
    double inside = 0.0, outside = 0.0;
    std::vector<double> x0(1), xi0(1);
    for (std::size_t ip = 0; ip < psg.position.size(); ++ip) {
        psg.position.coords(ip, x0.data());
        for (std::size_t iq = 0; iq < psg.momentum.size(); ++iq) {
            psg.momentum.coords(iq, xi0.data());
            const double m = h.at(ip, iq) * node_mass_weight(psg, ip, iq);
            (std::abs(x0[0]) <= lim && std::abs(xi0[0]) <= lim ? inside
                                                               : outside) += m;
        }
    }
    REQUIRE(inside > 0.0);
    CHECK(outside < 1e-6 * (inside + outside));
}

TEST_CASE("zero field gives zero husimi data and an empty concentration set") {
    const GridSpec g = box1(-1.0, 1.0, 41);
    const SampledField f(g, 1e-2);
    const HusimiField h = fbi_transform(f, psg1(-0.5, 0.5, 5, -0.5, 0.5, 5));
    CHECK(h.max_value() == 0.0);
    for (double v : h.values) CHECK(v == 0.0);
    CHECK(concentration_set(h, 0.5).empty());
}

TEST_CASE("fourier transform rotates the husimi picture") {
    const double hb = 1e-2;

    // packet at (a, b); its transform concentrates at (b, -a)
    const GridSpec g = box1(-1.05, 1.65, 541);
    const CoherentState st = gaussian_coherent({0.3}, {-0.4});
    const SampledField f = sample_coherent_state(st, g, hb);
    const SampledField ft = hbar_fourier(f, +1);

    const PhaseSpaceGrid pg = psg1(0.15, 0.45, 7, -0.55, -0.25, 7);
    const HusimiField h = fbi_transform(f, pg);
    const PhaseSpaceGrid pg_rot = psg1(-0.55, -0.25, 7, -0.45, -0.15, 7);
    const HusimiField hf = fbi_transform(ft, pg_rot);

    const double scale = h.max_value();
    REQUIRE(scale > 0.0);
    for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t j = 0; j < 7; ++j)
            CHECK(std::abs(hf.at(i, j) - h.at(6 - j, i)) < 1e-4 * scale);

    // model state with a linear phase: concentration moves to the rotated image
    ModelIsotropicState ms;
    ms.k = 0;
    ms.l = 1;
    ms.phase.kind = StatePhase::Kind::linear;
    ms.phase.xi = {0.25};
    ms.terms.push_back(gaussian_profile());
    const GridSpec g2 = box1(-2.0, 2.0, 801);
    const SampledField f2 = sample_model_state(ms, g2, hb);
    const SampledField f2t = hbar_fourier(f2, +1);
    const HusimiField h2 = fbi_transform(f2t, psg1(-0.05, 0.55, 13, -0.3, 0.3, 13));
    const auto pts = concentration_set(h2, 0.5);
    REQUIRE(!pts.empty());
    for (const auto& p : pts)
        CHECK(std::hypot(p[0] - 0.25, p[1]) <= 2.0 * std::sqrt(hb));
}

TEST_CASE("enveloped state concentrates on its zero section") {
    const double hb = 1e-2;
    const ModelIsotropicState st = enveloped_state();

    GridSpec g = make_box_grid({-3.4, -1.2}, {3.4, 1.2}, {137, 193});
    const SampledField f = sample_model_state(st, g, hb);

    PhaseSpaceGrid psg;
    psg.position = make_box_grid({-1.2, -0.45}, {1.2, 0.45}, {31, 11});
    psg.momentum = make_box_grid({-0.45, -0.45}, {0.45, 0.45}, {13, 17});
    const HusimiField h = fbi_transform(f, psg);
    CHECK(h.warnings.empty());

    const auto pts = concentration_set(h, 0.5);
    REQUIRE(!pts.empty());
    double xp_max = 0.0, xf_max = 0.0, kp_max = 0.0, kf_max = 0.0;
    for (const auto& p : pts) {
        REQUIRE(p.size() == 4);
        xp_max = std::max(xp_max, std::abs(p[0]));
        xf_max = std::max(xf_max, std::abs(p[1]));
        kp_max = std::max(kp_max, std::abs(p[2]));
        kf_max = std::max(kf_max, std::abs(p[3]));
    }
    // fast position and all momenta collapse at sqrt(hbar) scale, the slow
    // position keeps the envelope's half-max extent
    CHECK(xf_max <= 0.2);
    CHECK(kp_max <= 0.2);
    CHECK(kf_max <= 0.2);
    CHECK(xp_max >= 0.6);
    CHECK(xp_max <= 1.0);

    IsotropicSubmanifoldModel mdl;
    mdl.d = 1;
    mdl.n = 2;
    const double reach = std::sqrt(std::log(2.0) * (1.0 + hb));
    mdl.tau_box = {{-reach, reach}};
    mdl.embed = [](const double* tau, double* x, double* xi) {
        x[0] = tau[0];
        x[1] = 0.0;
        xi[0] = 0.0;
        xi[1] = 0.0;
    };
    const auto target = mdl.phase_space_samples(64);
    const double d = hausdorff_distance(pts, target);
    CHECK(d <= 10.0 * std::sqrt(hb));
    CHECK(d <= 0.35);
}

TEST_CASE("hausdorff distance on small clouds") {
    const std::vector<std::vector<double>> a = {{0.0, 0.0}, {1.0, 0.0}};
    const std::vector<std::vector<double>> b = {{0.0, 0.5}};
    const double d = hausdorff_distance(a, b);
    CHECK(std::abs(d - std::sqrt(1.25)) < 1e-15);
    CHECK(hausdorff_distance(b, a) == d);
    CHECK(hausdorff_distance(a, a) == 0.0);

    CHECK_THROWS_AS((void)hausdorff_distance({}, b), std::invalid_argument);
    CHECK_THROWS_AS((void)hausdorff_distance(a, {{0.0}}), std::invalid_argument);
}

TEST_CASE("width scaling exponents across the hbar schedule") {
    const auto schedule = HbarSchedule::standard(1).values;
    REQUIRE(schedule.size() >= 4);

    const ModelIsotropicState st = enveloped_state();
    std::vector<SampledField> model_fields;
    for (double hb : schedule) {
        const double rt = std::sqrt(hb);
        GridSpec g = make_box_grid({-4.0, -12.0 * rt}, {4.0, 12.0 * rt}, {121, 161});
        model_fields.push_back(sample_model_state(st, g, hb));
    }

    // fast axis: second moment is hbar/2
    const WidthScalingReport fast = width_scaling(model_fields, 1);
    CHECK(fast.excluded.empty());
    CHECK(std::abs(fast.exponent - 1.0) < 0.05);
    CHECK(std::abs(fast.exponent - 1.0) < 1e-3);
    CHECK(std::abs(fast.intercept - std::log(0.5)) < 1e-3);
    CHECK(fast.r_squared > 0.999999);

    // slow axis: hbar-independent profile width
    const WidthScalingReport slow = width_scaling(model_fields, 0);
    CHECK(slow.excluded.empty());
    CHECK(std::abs(slow.exponent) < 0.05);

    // coherent packet: every axis contracts at the sqrt(hbar) rate
    std::vector<SampledField> packets;
    for (double hb : schedule) {
        const double rt = std::sqrt(hb);
        const GridSpec g = box1(0.3 - 12.0 * rt, 0.3 + 12.0 * rt, 161);
        packets.push_back(
            sample_coherent_state(gaussian_coherent({0.3}, {-0.4}), g, hb));
    }
    const WidthScalingReport pk = width_scaling(packets, 0);
    CHECK(pk.excluded.empty());
    CHECK(std::abs(pk.exponent - 1.0) < 0.05);
    CHECK(pk.r_squared > 0.999999);
}

TEST_CASE("width scaling exclusions and validation") {
    const auto schedule = HbarSchedule::standard(1).values;
    std::vector<SampledField> fields;
    for (double hb : schedule) {
        const double rt = std::sqrt(hb);
        const GridSpec g = box1(0.3 - 12.0 * rt, 0.3 + 12.0 * rt, 161);
        fields.push_back(
            sample_coherent_state(gaussian_coherent({0.3}, {-0.4}), g, hb));
    }

    // a degenerate entry is excluded, the fit survives on the rest
    std::vector<SampledField> with_zero = fields;
    with_zero[2] = SampledField(with_zero[2].grid, schedule[2]);
    const WidthScalingReport rep = width_scaling(with_zero, 0);
    REQUIRE(rep.excluded.size() == 1);
    CHECK(rep.excluded[0] == 2);
    CHECK(std::abs(rep.exponent - 1.0) < 0.05);

    std::vector<SampledField> three(fields.begin(), fields.begin() + 3);
    CHECK_THROWS_AS((void)width_scaling(three, 0), std::invalid_argument);
    CHECK_THROWS_AS((void)width_scaling(fields, 1), std::invalid_argument);
    CHECK_THROWS_AS((void)width_scaling(fields, -1), std::invalid_argument);

    std::vector<SampledField> all_zero;
    for (double hb : schedule)
        all_zero.push_back(SampledField(box1(-1.0, 1.0, 21), hb));
    CHECK_THROWS_AS((void)width_scaling(all_zero, 0), std::invalid_argument);
}
