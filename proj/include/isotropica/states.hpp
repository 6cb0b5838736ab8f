#pragma once

#include <functional>
#include <optional>

#include "isotropica/catalog.hpp"
#include "isotropica/grid.hpp"

namespace isotropica {

// Product-structure state
//   hbar^r e^{i f(x)/hbar} sum_j phi_j(x', x''/sqrt(hbar)) hbar^{j/2},
// slowly varying along the first k coordinates (x'), concentrated at scale
// sqrt(hbar) along the last l coordinates (x'').
struct ModelIsotropicState {
    int k = 0, l = 0;
    double order_r = 0.0;
    StatePhase phase;            // on R^{k+l}
    std::vector<Profile> terms;  // phi_0, phi_1, ... (truncation depth J = size-1)

    int n() const { return k + l; }
    cdouble eval(const double* x, double hbar) const;
    // Guard "schwartz-decay": the weighted fast-tail |phi|(1+|v|)^10 must not
    // grow toward the edge of the sampled range.
    void check_schwartz(double vmax = 12.0) const;
};

SampledField sample_model_state(const ModelIsotropicState& st, const GridSpec& g,
                                double hbar);

// Localized packet e^{i f(x)/hbar} a((x-x0)/sqrt(hbar), hbar) with
// grad f(x0) = xi0.
struct CoherentState {
    std::vector<double> x0, xi0;
    StatePhase phase;
    std::function<cdouble(const double* v, double hbar)> amplitude;

    int n() const { return static_cast<int>(x0.size()); }
    cdouble eval(const double* x, double hbar) const;
    void check_center(double tol = 1e-10) const;
};

// Gaussian packet: f = xi0.(x-x0), a = e^{-|v|^2/(2 width^2)}.
CoherentState gaussian_coherent(std::vector<double> x0, std::vector<double> xi0,
                                double width = 1.0);

SampledField sample_coherent_state(const CoherentState& st, const GridSpec& g,
                                   double hbar);

// Parametrized submanifold tau -> (x(tau), xi(tau)) of phase space.
struct IsotropicSubmanifoldModel {
    int d = 1; // parameter dimension
    int n = 1; // ambient x dimension
    std::function<void(const double* tau, double* x, double* xi)> embed;
    std::vector<std::pair<double, double>> tau_box;
    bool loop = false; // closed in tau[0] over tau_box[0]

    // Max |pullback of sum dxi_i ^ dx_i| over sampled parameter points
    // (central finite differences); zero for d = 1.
    double isotropy_residual(int samples_per_axis = 9) const;
    // Sample points on the submanifold, `per_dim` per parameter axis.
    std::vector<std::vector<double>> phase_space_samples(int per_dim = 64) const;
};

// Weighted family tau -> coherent state with quadrature nodes.
struct CoherentFamily {
    int d = 0;
    std::vector<std::vector<double>> nodes; // tau values (possibly empty vectors, d=0)
    std::vector<double> node_weights;       // quadrature weight per node
    std::function<double(const double* tau)> density;     // w(tau)
    std::function<CoherentState(const double* tau)> member;
    double node_spacing = 0.0; // max lattice spacing; 0 when not applicable

    std::size_t size() const { return nodes.size(); }
};

// sum over nodes of weight * w(tau) * member(tau) sampled on g. Adds a
// metadata warning when the family's node spacing exceeds sqrt(hbar).
SampledField superpose(const CoherentFamily& fam, const GridSpec& g, double hbar);

// Gaussian-kernel decomposition: nodes on a tau-lattice over the slow support,
// spacing sqrt(hbar)/2, density (pi hbar)^(-k/2), members
//   state(x) * e^{-|x'-tau|^2/hbar},
// which are coherent states centered at ((tau,0), grad f(tau,0)). Superposing
// the family reconstructs the state.
CoherentFamily decompose_model_state(const ModelIsotropicState& st, double hbar);

// Loop action integral of xi.dx reduced to (-pi*s, pi*s] with s = hbar (when
// given) or 1: the obstruction to a single-valued oscillatory prefactor.
double bohr_sommerfeld_residue(const IsotropicSubmanifoldModel& loop,
                               std::optional<double> hbar = std::nullopt);

} // namespace isotropica
