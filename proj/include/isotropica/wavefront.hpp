#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "isotropica/grid.hpp"

namespace isotropica {

// Sampling lattice for T*X diagnostics: a position grid and a momentum grid
// of the same dimension.
struct PhaseSpaceGrid {
    GridSpec position;
    GridSpec momentum;

    int dim() const { return position.dim(); }
    std::size_t size() const { return position.size() * momentum.size(); }
};

// |<psi, g_{x0,xi0}>|^2 on a PhaseSpaceGrid; position index slowest.
struct HusimiField {
    PhaseSpaceGrid grid;
    std::vector<double> values;
    double hbar = 1.0;
    std::vector<std::string> warnings;

    double at(std::size_t ipos, std::size_t imom) const {
        return values[ipos * grid.momentum.size() + imom];
    }
    double max_value() const;
    // integral over the phase-space grid (trapezoid weights on both factors)
    double total_mass() const;
};

// Husimi function of the field against L2-normalized Gaussian windows
//   g_{x0,xi0}(x) = (pi hbar)^{-n/4} e^{i xi0.x / hbar} e^{-|x-x0|^2 / 2 hbar},
// evaluated by direct windowed sums truncated at |x - x0| > 12 sqrt(hbar)
// per axis (the discarded Gaussian tail is ~1e-63). Position slices run in
// parallel. Periodic axes use the wrapped displacement in the window factor,
// so concentration diagnostics are meaningful only for states supported away
// from the seam. A phase-space grid coarser than sqrt(hbar) along any axis
// gets a resolution warning on the result.
HusimiField fbi_transform(const SampledField& field, const PhaseSpaceGrid& psg);

// Grid points (x0..., xi0...) where H >= threshold_fraction * max(H).
// An identically zero field yields an empty list.
std::vector<std::vector<double>> concentration_set(const HusimiField& h,
                                                   double threshold_fraction = 0.5);

// Symmetric Hausdorff distance between two nonempty point clouds in R^d.
double hausdorff_distance(const std::vector<std::vector<double>>& a,
                          const std::vector<std::vector<double>>& b);

struct WidthScalingReport {
    double exponent = 0.0;  // fitted slope of log(moment) vs log(hbar)
    double intercept = 0.0; // fitted log-intercept
    double r_squared = 0.0;
    std::vector<std::size_t> excluded; // inputs with degenerate moments
};

// Least-squares fit of the log second central moment along `axis` of |psi|^2
// against log hbar across fields sampled at distinct hbar values (>= 4).
// Degenerate moments are excluded from the fit and flagged.
WidthScalingReport width_scaling(const std::vector<SampledField>& states, int axis);

} // namespace isotropica
