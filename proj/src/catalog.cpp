#include "isotropica/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace isotropica {

namespace {
constexpr double pi = std::numbers::pi;

double bump_base(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }
} // namespace

double smoothstep(double t) {
    double a = bump_base(t), b = bump_base(1.0 - t);
    return a / (a + b);
}

double ScalarShape::eval(const double* v, int l) const {
    if (l == 0) return 1.0;
    double r2 = 0.0;
    for (int i = 0; i < l; ++i) r2 += v[i] * v[i];
    switch (kind) {
    case Kind::gaussian:
        return std::exp(-r2 / (2.0 * width * width));
    case Kind::bump: {
        double q = r2 / (width * width);
        if (q >= 1.0) return 0.0;
        return std::exp(1.0 - 1.0 / (1.0 - q));
    }
    case Kind::poly_gaussian: {
        double p = 0.0, mono = 1.0;
        for (double cq : coeffs) { p += cq * mono; mono *= v[0]; }
        return p * std::exp(-r2 / (2.0 * width * width));
    }
    }
    return 0.0;
}

double ScalarShape::tail_radius() const {
    if (kind == Kind::bump) return width;
    // |p(v)| e^{-v^2/2w^2} < 1e-16 comfortably once |v| > w * 10 for the
    // low-degree catalog polynomials.
    double deg = kind == Kind::poly_gaussian && !coeffs.empty()
                     ? static_cast<double>(coeffs.size() - 1)
                     : 0.0;
    return width * (10.0 + deg);
}

double Envelope::eval(const double* xp, int k) const {
    if (k == 0) return 1.0;
    double out = 1.0;
    switch (kind) {
    case Kind::one:
        return 1.0;
    case Kind::gaussian: {
        double r2 = 0.0;
        for (int i = 0; i < k; ++i) r2 += (xp[i] - center) * (xp[i] - center);
        return std::exp(-r2 / (2.0 * width * width));
    }
    case Kind::plateau:
        for (int i = 0; i < k; ++i) {
            out *= smoothstep((xp[i] - (lo - ramp)) / ramp) *
                   smoothstep(((hi + ramp) - xp[i]) / ramp);
        }
        return out;
    }
    return out;
}

void Envelope::support(double& s_lo, double& s_hi) const {
    switch (kind) {
    case Kind::one:
        s_lo = -1.0; s_hi = 1.0; // conventional unit window
        return;
    case Kind::gaussian:
        s_lo = center - 9.0 * width; s_hi = center + 9.0 * width;
        return;
    case Kind::plateau:
        s_lo = lo - ramp; s_hi = hi + ramp;
        return;
    }
}

double StatePhase::eval(const double* x, int n) const {
    switch (kind) {
    case Kind::zero:
        return c;
    case Kind::linear: {
        double s = c;
        for (int i = 0; i < n; ++i) s += xi[i] * x[i];
        return s;
    }
    case Kind::quadratic: {
        double s = c;
        for (int i = 0; i < n; ++i) {
            if (!xi.empty()) s += xi[i] * x[i];
            for (int j = 0; j < n; ++j) s += 0.5 * quad[i][j] * x[i] * x[j];
        }
        return s;
    }
    }
    return 0.0;
}

void StatePhase::grad(const double* x, int n, double* out) const {
    for (int i = 0; i < n; ++i) out[i] = 0.0;
    if (kind == Kind::zero) return;
    for (int i = 0; i < n; ++i) out[i] = xi.empty() ? 0.0 : xi[i];
    if (kind == Kind::quadratic) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                out[i] += 0.5 * (quad[i][j] + quad[j][i]) * x[j];
    }
}

double Potential::eval(const double* x) const {
    if (kind == Kind::quadratic) {
        double r2 = 0.0;
        for (int i = 0; i < n; ++i) r2 += x[i] * x[i];
        return 0.5 * omega * omega * r2 + shift;
    }
    double v = shift;
    for (const auto& m : modes) {
        double ph = 0.0;
        for (int i = 0; i < n; ++i) ph += m.d[i] * x[i];
        v += m.a * std::cos(ph) + m.b * std::sin(ph);
    }
    return v;
}

void Potential::grad(const double* x, double* out) const {
    for (int i = 0; i < n; ++i) out[i] = 0.0;
    if (kind == Kind::quadratic) {
        for (int i = 0; i < n; ++i) out[i] = omega * omega * x[i];
        return;
    }
    for (const auto& m : modes) {
        double ph = 0.0;
        for (int i = 0; i < n; ++i) ph += m.d[i] * x[i];
        double s = std::sin(ph), cph = std::cos(ph);
        for (int i = 0; i < n; ++i) out[i] += m.d[i] * (-m.a * s + m.b * cph);
    }
}

int Potential::trig_degree(int axis) const {
    int deg = 0;
    for (const auto& m : modes) deg = std::max(deg, std::abs(m.d[axis]));
    return deg;
}

bool Potential::cos_only() const {
    for (const auto& m : modes)
        if (m.b != 0.0) return false;
    return true;
}

namespace {
double scan_extremum(const Potential& V, double halfwidth, bool want_max) {
    const int samples = 4097;
    std::vector<double> x(V.n, 0.0);
    double best = want_max ? -1e300 : 1e300;
    if (V.n == 1) {
        for (int i = 0; i < samples; ++i) {
            x[0] = -halfwidth + 2.0 * halfwidth * i / (samples - 1);
            double v = V.eval(x.data());
            best = want_max ? std::max(best, v) : std::min(best, v);
        }
    } else {
        const int s2 = 513;
        for (int i = 0; i < s2; ++i)
            for (int j = 0; j < s2; ++j) {
                x[0] = -halfwidth + 2.0 * halfwidth * i / (s2 - 1);
                x[1] = -halfwidth + 2.0 * halfwidth * j / (s2 - 1);
                double v = V.eval(x.data());
                best = want_max ? std::max(best, v) : std::min(best, v);
            }
    }
    return best;
}
} // namespace

double Potential::min_value(double box_halfwidth) const {
    return scan_extremum(*this, box_halfwidth, false);
}
double Potential::max_value(double box_halfwidth) const {
    return scan_extremum(*this, box_halfwidth, true);
}

double Potential::period_scale(double box_halfwidth) const {
    if (kind == Kind::quadratic) return 2.0 * pi / std::max(omega, 1e-12);
    double curv = 0.0;
    for (const auto& m : modes) {
        double d2 = 0.0;
        for (int i = 0; i < n; ++i) d2 += double(m.d[i]) * m.d[i];
        curv += d2 * (std::abs(m.a) + std::abs(m.b));
    }
    (void)box_halfwidth;
    return 2.0 * pi / std::sqrt(curv + 1.0);
}

Potential cosine_potential(double a, double shift) {
    Potential V;
    V.kind = Potential::Kind::trig;
    V.n = 1;
    V.modes = {{{1}, a, 0.0}};
    V.shift = shift;
    return V;
}

Potential free_potential(int n, double shift) {
    Potential V;
    V.kind = Potential::Kind::trig;
    V.n = n;
    V.shift = shift;
    return V;
}

Potential two_mode_potential(double a1, double a2, double shift) {
    Potential V;
    V.kind = Potential::Kind::trig;
    V.n = 1;
    V.modes = {{{1}, a1, 0.0}, {{2}, a2, 0.0}};
    V.shift = shift;
    return V;
}

Potential separable_2d_potential(double a, double shift) {
    Potential V;
    V.kind = Potential::Kind::trig;
    V.n = 2;
    V.modes = {{{1, 0}, a, 0.0}, {{0, 1}, a, 0.0}};
    V.shift = shift;
    return V;
}

Potential product_2d_potential(double a, double shift) {
    // cos x1 cos x2 = (cos(x1+x2) + cos(x1-x2)) / 2
    Potential V;
    V.kind = Potential::Kind::trig;
    V.n = 2;
    V.modes = {{{1, 1}, a / 2, 0.0}, {{1, -1}, a / 2, 0.0}};
    V.shift = shift;
    return V;
}

Potential harmonic_well(double omega, double shift) {
    Potential V;
    V.kind = Potential::Kind::quadratic;
    V.n = 1;
    V.omega = omega;
    V.shift = shift;
    return V;
}

double TestFunction::eval(double y) const {
    double t = (y - center) / width;
    switch (kind) {
    case Kind::gaussian:
        return std::exp(-t * t / 2.0);
    case Kind::bump:
        return std::abs(t) >= 1.0 ? 0.0 : std::exp(1.0 - 1.0 / (1.0 - t * t));
    case Kind::hermite_damped: {
        double p = 1.0;
        for (int q = 0; q < degree; ++q) p *= t;
        return p * std::exp(-t * t / 2.0);
    }
    }
    return 0.0;
}

double TestFunction::integral() const {
    if (kind == Kind::gaussian) return width * std::sqrt(2.0 * pi);
    // Composite 32-point Gauss-Legendre over the decay range; deterministic.
    static const double gl_x[16] = {
        0.0483076656877383162, 0.1444719615827964934, 0.2392873622521370745,
        0.3318686022821276497, 0.4213512761306353454, 0.5068999089322293900,
        0.5877157572407623290, 0.6630442669302152009, 0.7321821187402896804,
        0.7944837959679424069, 0.8493676137325699701, 0.8963211557660521239,
        0.9349060759377396891, 0.9647622555875064307, 0.9856115115452683354,
        0.9972638618494815635};
    static const double gl_w[16] = {
        0.0965400885147278006, 0.0956387200792748594, 0.0938443990808045654,
        0.0911738786957638847, 0.0876520930044038111, 0.0833119242269467552,
        0.0781938957870703065, 0.0723457941088485062, 0.0658222227763618468,
        0.0586840934785355471, 0.0509980592623761762, 0.0428358980222266807,
        0.0342738629130214331, 0.0253920653092620595, 0.0162743947309056706,
        0.0070186100094700966};
    double R = decay_radius(1e-18);
    double lo = center - R, hi = center + R;
    const int panels = 64;
    double h = (hi - lo) / panels, total = 0.0;
    for (int p = 0; p < panels; ++p) {
        double a = lo + p * h, mid = a + h / 2, half = h / 2, s = 0.0;
        for (int q = 0; q < 16; ++q)
            s += gl_w[q] * (eval(mid + half * gl_x[q]) + eval(mid - half * gl_x[q]));
        total += s * half;
    }
    return total;
}

double TestFunction::decay_radius(double floor_rel) const {
    if (kind == Kind::bump) return width;
    // Solve t^deg e^{-t^2/2} = floor by outward scan; peak is O(1).
    double t = 1.0;
    while (t < 200.0) {
        double v = std::pow(t, degree) * std::exp(-t * t / 2.0);
        if (v < floor_rel) break;
        t += 0.25;
    }
    return t * width;
}

double CutoffComplement::eval(double s) const {
    double a = std::abs(s);
    if (a <= inner) return 0.0;
    if (a >= outer) return 1.0;
    return smoothstep((a - inner) / (outer - inner));
}

} // namespace isotropica
