#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "isotropica/catalog.hpp"
#include "isotropica/grid.hpp"

namespace isotropica {

// Discretized P = 1/2 hbar^2 Laplacian + V on a flat torus [-period/2,
// period/2)^n (a quadratic well uses the same periodic box, sized so the
// states of interest never see the seam). Eigenvalues are retained in
// [-window, window].
struct SchrodingerProblem {
    int n = 1;
    Potential V;
    double hbar = 1e-2;
    int M = 1024;          // grid / Fourier modes per axis, power of two
    double period = 2.0 * 3.14159265358979323846;
    double window = 1.0;   // retention / extraction window for eigenvalues
    bool keep_eigenvectors = false;

    // Nyquist momentum hbar * (M/2) * (2 pi / period) of the discretization.
    double nyquist() const;
    // Classical momentum reach sqrt(2 (window - min V)) the grid must cover.
    double momentum_requirement() const;
    // Guard "spectral-resolution": nyquist() must exceed the requirement by
    // >= 2, else refuses with the minimal admissible power-of-two M.
    void validate() const;
};

struct SpectrumResult {
    double hbar = 0.0;
    int n = 1;
    double window = 0.0;               // completeness certificate: all
                                       // eigenvalues in [-window, window]
    std::vector<double> eigenvalues;   // sorted ascending
    // Optional position-space eigenvectors (row j matches eigenvalues[j]),
    // L2-normalized against `grid`.
    std::vector<std::vector<double>> eigenvectors;
    GridSpec grid;
};

// Eigenvalues of the Fourier discretization of 1/2 hbar^2 Delta + V inside
// [-window, window]. Trig potentials on T^1 use a banded Fourier-Galerkin
// matrix (degree-wide band, M up to 2^17); separable trig potentials on T^2
// are solved per axis and merged exactly; everything else (quadratic wells,
// eigenvector requests, non-separable V) goes through the dense
// pseudospectral matrix, which caps the problem size.
SpectrumResult diagonalize(const SchrodingerProblem& p);

// Exact eigenvalue ladder hbar (j + 1/2) - 1 of the unit-frequency well
// V = x^2/2 - 1, restricted to [-window, window]. Reference spectrum for the
// trace and counting checks at hbar too small to diagonalize densely.
SpectrumResult harmonic_surrogate(double hbar, double window = 1.0);

enum class MeasureMethod { volume_derivative, monte_carlo };

struct LevelSetMeasure {
    double value = 0.0;  // Liouville measure of {H = E}
    double energy = 0.0;
    MeasureMethod method = MeasureMethod::volume_derivative;
    double error = 0.0;  // Richardson gap or Monte Carlo standard error
};

struct LiouvilleOptions {
    double delta_scale = 1e-3;     // finite-difference step, times energy scale
    std::size_t mc_samples = 10'000'000;
    std::uint64_t seed = 7u;
    double box_halfwidth = 6.0;    // position box for non-periodic potentials
};

// d/dE Vol{1/2 |xi|^2 + V <= E}, either by central differences of exact
// phase-space volumes (Richardson-extrapolated from delta and delta/2) or by
// Monte Carlo shell counting with a reported standard error. Zero must be a
// regular value of H on the sampled level set (|grad H| > 1e-3), else guard
// "hypothesis-violation". An empty level set gives measure zero.
LevelSetMeasure liouville_measure(const Potential& V, int n, double E = 0.0,
                                  MeasureMethod method = MeasureMethod::volume_derivative,
                                  const LiouvilleOptions& opts = {});

// Spectral multipliers phi(E_j / sqrt(hbar)), one per retained eigenvalue.
std::vector<double> apply_p_phi(const SpectrumResult& s, const TestFunction& phi);

// Dense kernel sum_j phi(E_j/sqrt(hbar)) psi_j(x) psi_j(y) on the result's
// position grid (row-major). Requires retained eigenvectors.
std::vector<double> p_phi_kernel(const SpectrumResult& s, const TestFunction& phi);

struct ScaledTraceRecord {
    double hbar = 0.0;
    double lhs = 0.0;       // sum_j phi(E_j / sqrt(hbar))
    double rhs = 0.0;       // (2 pi)^{-n} hbar^{-n+1/2} |Theta| phihat(0)
    double ratio = 0.0;     // NaN when rhs vanishes
    double deviation = 0.0; // ratio - 1
};

// Leading-order trace comparison. Guard "trace-window": the retention window
// must reach where phi(E/sqrt(hbar)) < 1e-14 of its peak.
ScaledTraceRecord scaled_trace_check(const SpectrumResult& s, const TestFunction& phi,
                                     const LevelSetMeasure& theta);

struct ScaledTraceStudy {
    std::vector<ScaledTraceRecord> records; // one per hbar, input order
    bool decay_mode = false; // phihat(0) = 0: fit log|LHS| instead
    double exponent = 0.0;   // slope of log|deviation| (or log|LHS|) vs log hbar
    double r_squared = 0.0;
};

// Correction-exponent fit across an hbar schedule (>= 3 distinct values).
// The deviation from the leading term shrinks like sqrt(hbar), so the fitted
// exponent is expected near 1/2; when phihat(0) = 0 the leading term is
// absent and the study fits the decay rate of the remainder instead.
ScaledTraceStudy scaled_trace_study(const std::vector<SpectrumResult>& results,
                                    const TestFunction& phi,
                                    const LevelSetMeasure& theta);

struct WeylCountRecord {
    std::size_t count = 0;   // #{ j : |E_j| <= c hbar^alpha }, ties closed
    double prediction = 0.0; // 2 c (2 pi)^{-n} hbar^{-n+alpha} |Theta|
    double ratio = 0.0;      // count / prediction, NaN when prediction is 0
    double window = 0.0;     // c hbar^alpha
};

// Counting law check for alpha in (0,1). Guard "count-window": the spectrum
// must be complete out to 2 c hbar^alpha.
WeylCountRecord weyl_count_check(const SpectrumResult& s, double c, double alpha,
                                 const LevelSetMeasure& theta);

// gamma(lambda, hbar) = int e^{i lambda s} rho(s / sqrt(hbar)) chi_c(s) ds
// by panel quadrature. chi_c is the complement of a cutoff equal to 1 near 0;
// chi_c identically zero on the integration range gives exactly 0. With
// box > 0 the integration is restricted to [-box, box]; guard
// "quadrature-box" if that clips the integrand's support.
cdouble gamma_decay(const TestFunction& rho, const CutoffComplement& chi_c,
                    double lambda, double hbar, double box = 0.0);

struct GammaLatticePoint {
    double lambda = 0.0, hbar = 0.0, gamma_abs = 0.0;
};

struct GammaDecayReport {
    std::vector<GammaLatticePoint> lattice;
    // c_kn[k][N] = max over the lattice of |gamma| lambda^k hbar^{-N}: the
    // smallest constant with |gamma| <= c lambda^{-k} hbar^N on the lattice.
    std::array<std::array<double, 5>, 5> bound_constant{};
    bool monotone_in_lambda = true; // |gamma| nonincreasing in lambda per hbar
};

GammaDecayReport gamma_decay_report(const TestFunction& rho,
                                    const CutoffComplement& chi_c,
                                    const std::vector<double>& lambdas,
                                    const std::vector<double>& hbars);

} // namespace isotropica
