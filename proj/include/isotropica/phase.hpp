#pragma once

#include <functional>
#include <string>
#include <vector>

#include "isotropica/grid.hpp"

namespace isotropica {

// Real phase f(x, s) on base R^n with fiber s = (t, u) in R^K x R^l. The
// trailing u block is the one scaled by hbar^{-1/2} inside oscillatory
// integrals and intersected with {u=0} by the validation conditions.
struct PhaseFunction {
    int n = 1;
    int K = 0;
    int l = 0;
    std::function<double(const double* x, const double* s)> f;
    // optional analytic gradient (dx: n entries, ds: N entries); when absent,
    // gradient() falls back to central differences
    std::function<void(const double* x, const double* s, double* dx, double* ds)>
        grad;
    std::string name;

    int N() const { return K + l; }
    double eval(const double* x, const double* s) const;
    void gradient(const double* x, const double* s, double* dx, double* ds) const;
};

// f(x,t,u) = sum_i t_i (x''_i - u_i) on R^{k+l} with K = l fiber t-variables.
PhaseFunction model_phase(int k, int l);
// f(x,t) = t x^2 on R; its rank condition degenerates at x = 0.
PhaseFunction fold_phase();
// g((y,x), s) = s.(y-x), the phase generating the identity relation.
PhaseFunction identity_relation_phase(int nx);
// g((y,x)) = -x.y, the fiberless phase of the hbar-Fourier pairing.
PhaseFunction fourier_pairing_phase(int nx);

// F(y,(x,s,t,u)) = f(x,t,u) + g((y,x),s): the base of g splits as (y,x) with
// ny leading y-dims; fiber dim of the result is n + N_g + N_f.
PhaseFunction compose_phase(const PhaseFunction& f, const PhaseFunction& g, int ny);

// Amplitude a(x, t, w, hbar) with w the hbar^{-1/2}-scaled fast argument;
// Schwartz in w, compactly supported in t within the declared boxes.
struct Amplitude {
    int K = 0;
    int l = 0;
    std::function<cdouble(const double* x, const double* t, const double* w,
                          double hbar)>
        eval;
    std::vector<std::pair<double, double>> t_box; // declared t-support, size K
    double u_width = 1.0; // decay scale of the w-profile
    // per-fiber-axis factors (t axes then u axes, u factors taking w) when the
    // amplitude is separable; empty otherwise
    std::vector<std::function<cdouble(double)>> fiber_factors;
    std::function<cdouble(const double* x)> base_factor;

    // Verify declared t-support and polynomial-weighted w-decay by sampling.
    void check() const;
};

// Separable e^{-|t|^2/2tw^2} * e^{-|w|^2/2uw^2} with declared boxes.
Amplitude gaussian_fiber_amplitude(int K, int l, double t_width, double u_width);

struct PhaseSampleCheck {
    std::vector<double> point; // Newton-refined (x, s) on the critical set
    bool rank_full = false;        // (a) D(d_s f) has rank N
    bool model_transverse = false; // (b) rank N + l with the du rows appended
    bool immersion = false;        // (c) (x, d_x f) immersive along the slice
    bool pass() const { return rank_full && model_transverse && immersion; }
};

struct PhaseValidationReport {
    std::vector<PhaseSampleCheck> samples;
    bool all_pass() const;
};

// Refine each seed onto the critical set (Newton on d_s f = 0 at fixed x,
// pseudo-inverse steps, 50 iterations) and check the three rank conditions
// there. Singular values above tol * (largest singular value) count as
// nonzero. A seed that does not converge raises guard "no-critical-point".
PhaseValidationReport validate_phase(const PhaseFunction& ph,
                                     const std::vector<std::vector<double>>& seeds,
                                     double tol = 1e-7);

struct CleanIntersectionDims {
    int dim_intersection = 0;
    int dim_X = 0;
    int dim_Y = 0;
    int dim_Sigma = 0;
    int dim_Gamma = 0;
};

// e = dim[I] + dim(T*X x T*Y) - (dim Gamma + dim(T*X x Sigma)); zero exactly
// for transverse intersections. Inconsistent dimension sets throw.
int excess(const CleanIntersectionDims& d);

// hbar^{r - N/2} \int e^{i f(x,t,u)/hbar} a(x, t, hbar^{-1/2} u, hbar) dt du
// by composite tensor-product Gauss-Legendre with at least 16 nodes per
// phase period along every fiber axis. Node budget overruns raise guard
// "quadrature-resolution". `refine` multiplies the panel count per axis
// (oracle runs).
cdouble oscillatory_integral(const PhaseFunction& ph, const Amplitude& a, double r,
                             const std::vector<double>& x, double hbar,
                             int refine = 1);

struct StationaryPhaseResult {
    cdouble value{0.0, 0.0};
    std::size_t critical_points = 0; // inside the amplitude support
    bool rapidly_decaying = false;   // no critical point met the support
    double hessian_cond = 0.0;       // worst conditioning among contributions
};

// Leading stationary-phase term summed over the non-degenerate critical
// points of s -> f(x,s): (2 pi hbar)^{N/2} |det H|^{-1/2} e^{i pi sigma / 4}
// e^{i f/hbar} a, without the hbar^{r-N/2} order prefactor (multiply by it to
// cross-check oscillatory_integral). Degenerate or badly conditioned Hessians
// raise guard "degenerate-critical-point".
StationaryPhaseResult stationary_phase_leading(const PhaseFunction& ph,
                                               const Amplitude& a,
                                               const std::vector<double>& x,
                                               double hbar);

// Integrate out the trailing fiber axes of a product-grid field (the first
// x_dims axes form the base).
SampledField pushforward(const SampledField& field, int x_dims);

} // namespace isotropica
