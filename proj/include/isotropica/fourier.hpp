#pragma once

#include <optional>

#include "isotropica/grid.hpp"

namespace isotropica {

// Semiclassically scaled Fourier transform
//   (F_s psi)(xi) = (2 pi hbar)^(-n/2) Integral e^{-i s x.xi / hbar} psi(x) dx,
// s = +1 forward / -1 inverse, realized as a scaled FFT with explicit pre- and
// post-phase factors. It quantizes the phase-space rotation
// (x, xi) -> (xi, -x) for s = +1.
//
// By default the output lives on the zero-centered dual grid: along each axis
// the spacing is 2 pi hbar / (m * dx) with the same m points, marked periodic.
// A caller may instead supply `target`, a grid with matching counts and
// dual-consistent spacing but any window placement (e.g. the original grid,
// for an exact inverse round trip); window offsets only change the phase
// factors, never the FFT.
//
// Guard "fourier-resolution": a target window re-centered beyond the Nyquist
// momentum pi hbar / dx of the input grid is refused.
SampledField hbar_fourier(const SampledField& f, int sign,
                          const std::optional<GridSpec>& target = std::nullopt);

// Half-width pi hbar / dx of the representable momentum window along axis a.
double nyquist_momentum(const GridSpec& g, double hbar, int a);

// The default (zero-centered) dual grid of g.
GridSpec dual_grid(const GridSpec& g, double hbar);

// Literal resolution check for a declared momentum support: refuses (guard
// "fourier-resolution") when xi_max * dx / hbar >= pi along any axis.
void require_xi_resolved(const GridSpec& g, double hbar, double xi_max);

} // namespace isotropica
