#pragma once

#include <complex>
#include <string>
#include <vector>

#include "isotropica/errors.hpp"

namespace isotropica {

using cdouble = std::complex<double>;

// C-infinity step: 0 for t <= 0, 1 for t >= 1, strictly monotone between.
double smoothstep(double t);

// Schwartz-class factor on the fast variables v in R^l.
struct ScalarShape {
    enum class Kind { gaussian, bump, poly_gaussian };
    Kind kind = Kind::gaussian;
    double width = 1.0;
    std::vector<double> coeffs; // poly_gaussian: sum_q coeffs[q] v_1^q times gaussian

    double eval(const double* v, int l) const;
    // Radius beyond which |value| < 1e-16 * peak (box sizing for quadrature).
    double tail_radius() const;
};

// Slowly varying envelope on the x' variables (applied per axis).
struct Envelope {
    enum class Kind { one, gaussian, plateau };
    Kind kind = Kind::one;
    double center = 0.0, width = 1.0; // gaussian: e^{-|x'-c|^2/(2w^2)}
    double lo = -1.0, hi = 1.0, ramp = 0.5; // plateau: 1 on [lo,hi], 0 outside +/- ramp

    double eval(const double* xp, int k) const;
    void support(double& s_lo, double& s_hi) const; // per-axis effective support
};

// One expansion coefficient phi_j(x', v) = envelope(x') * shape(v).
struct Profile {
    Envelope envelope;
    ScalarShape shape;
    cdouble eval(const double* xp, int k, const double* v, int l) const {
        return cdouble{envelope.eval(xp, k) * shape.eval(v, l), 0.0};
    }
};

// Real polynomial phase of degree <= 2 with analytic gradient.
struct StatePhase {
    enum class Kind { zero, linear, quadratic };
    Kind kind = Kind::zero;
    std::vector<double> xi; // linear: f = xi.x + c
    double c = 0.0;
    std::vector<std::vector<double>> quad; // quadratic: 1/2 x^T Q x + xi.x + c

    double eval(const double* x, int n) const;
    void grad(const double* x, int n, double* out) const;
};

// Real potential on the torus (trigonometric polynomial) or a boxed
// quadratic well.
struct Potential {
    struct TrigMode {
        std::vector<int> d; // integer frequency vector, one entry per axis
        double a = 0.0;     // cos(d.x) coefficient
        double b = 0.0;     // sin(d.x) coefficient
    };
    enum class Kind { trig, quadratic };
    Kind kind = Kind::trig;
    int n = 1;
    std::vector<TrigMode> modes;
    double shift = 0.0;
    double omega = 1.0; // quadratic: V = 1/2 omega^2 |x|^2 + shift

    double eval(const double* x) const;
    void grad(const double* x, double* out) const;
    int trig_degree(int axis) const;
    bool cos_only() const; // all sin coefficients zero
    // Extrema estimated by dense scan (exact for the catalog entries we use).
    double min_value(double box_halfwidth) const;
    double max_value(double box_halfwidth) const;
    // Characteristic oscillation period 2*pi / sqrt(max |V''| + 1).
    double period_scale(double box_halfwidth) const;
};

Potential cosine_potential(double a, double shift);      // n=1: a cos x + shift
Potential free_potential(int n, double shift);           // V = shift
Potential two_mode_potential(double a1, double a2, double shift); // a1 cos x + a2 cos 2x + shift
Potential separable_2d_potential(double a, double shift); // a (cos x1 + cos x2) + shift
Potential product_2d_potential(double a, double shift);   // a cos x1 cos x2 + shift
Potential harmonic_well(double omega, double shift);      // boxed 1/2 w^2 x^2 + shift

// Schwartz test function on R used by the spectral multipliers.
struct TestFunction {
    enum class Kind { gaussian, bump, hermite_damped };
    Kind kind = Kind::gaussian;
    double center = 0.0, width = 1.0;
    int degree = 0; // hermite_damped: (y-c)^degree * gaussian

    double eval(double y) const;
    double integral() const; // int_R, analytic for gaussian, quadrature otherwise
    // |y - center| beyond which |phi| < floor * sup|phi|.
    double decay_radius(double floor_rel = 1e-14) const;
};

// Complement 1 - chi of a cutoff equal to 1 on [-inner, inner] and supported
// in [-outer, outer]; C-infinity ramps.
struct CutoffComplement {
    double inner = 1.0, outer = 2.0;
    double eval(double s) const;
};

} // namespace isotropica
