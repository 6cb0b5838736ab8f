#pragma once

#include <vector>

#include "isotropica/catalog.hpp"
#include "isotropica/grid.hpp"
#include "isotropica/spectra.hpp"
#include "isotropica/states.hpp"

namespace isotropica {

// Time-stepping parameters for the split-step propagator.
struct PropagatorConfig {
    double dt = 1e-3;      // time step
    std::size_t steps = 0; // fixed step count; 0 derives the count from t
    int order = 2;         // splitting order; 2 (Strang) is the only one

    // Guard "phase-resolution": dt must not exceed sqrt(hbar)/10, the step
    // at which the split-step phase error stays below the packet scale.
    void validate(double hbar) const;
};

// Phase-space point with its energy 1/2 |xi|^2 + V(x).
struct ClassicalState {
    std::vector<double> x, xi;
    double energy = 0.0;
    // Relative energy change accumulated by the flow that produced this
    // state; 0 for hand-built states.
    double energy_drift = 0.0;
};

// Fills in the energy for a hand-built phase-space point.
ClassicalState classical_state(const Potential& V, std::vector<double> x,
                               std::vector<double> xi);

// Hamilton flow of 1/2 |xi|^2 + V by leapfrog (kick-drift-kick) steps, which
// preserve the symplectic form exactly and the energy to O(step^2) without
// secular drift. `step` <= 0 picks a quarter of the cap 1e-3 * (period
// scale); an explicit step above the cap is refused (guard "flow-step").
ClassicalState classical_flow(const Potential& V, int n, const ClassicalState& s0,
                              double t, double step = 0.0);

// U(t) = e^{-i t P / hbar} by Strang splitting
//   e^{-i dt V / 2 hbar} e^{-i dt (hbar^2 |k|^2 / 2) / hbar} e^{-i dt V / 2 hbar},
// the kinetic factor applied as an exact Fourier multiplier on the periodic
// grid. The field must live on p's torus grid (period, M, n) at p's hbar.
// Norm is preserved to machine precision per step.
SampledField evolve(const SampledField& field, const SchrodingerProblem& p,
                    double t, const PropagatorConfig& cfg);

// Center (x, xi) of a coherent-state-like field: position from the circular
// mean of |psi|^2 (the phase-space density's position marginal has the same
// mean), momentum from the mean of the hbar-Fourier side. The energy field is
// left 0 (a sampled field does not carry its potential); use classical_state
// to fill it. Guard "center-ambiguous": zero fields, fields whose phase-space
// mass escapes the scanned window, and fields with a second concentration
// peak (>= 50% of the maximum farther than 10 sqrt(hbar) from it) refuse.
ClassicalState track_center(const SampledField& field);

// Evolves every family member on p's torus grid, then superposes with the
// family's own weights; equals evolve(superpose(family)) by linearity.
SampledField propagate_superposition(const CoherentFamily& family,
                                     const SchrodingerProblem& p, double t,
                                     const PropagatorConfig& cfg);

} // namespace isotropica
