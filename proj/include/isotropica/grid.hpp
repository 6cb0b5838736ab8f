#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "isotropica/errors.hpp"

namespace isotropica {

using cdouble = std::complex<double>;

struct AxisSpec {
    double lo = 0.0;
    double hi = 1.0;
    int m = 2;             // sample count along the axis, >= 2
    bool periodic = false; // periodic: nodes lo + i*h, h=(hi-lo)/m, hi excluded
                           // boxed:    nodes lo + i*h, h=(hi-lo)/(m-1), both ends
};

// Tensor-product sampling grid. Flat storage is row-major with axis 0
// slowest; this order is the canonical summation order everywhere.
class GridSpec {
public:
    GridSpec() = default;
    explicit GridSpec(std::vector<AxisSpec> axes);

    int dim() const { return static_cast<int>(axes_.size()); }
    const AxisSpec& axis(int a) const { return axes_[a]; }
    const std::vector<AxisSpec>& axes() const { return axes_; }

    std::size_t size() const;          // total sample count
    double spacing(int a) const;
    double point(int a, int i) const;  // i-th node along axis a
    double cell_volume() const;        // product of spacings

    // Quadrature weight of node i along axis a (trapezoid endpoints halved on
    // boxed axes, uniform on periodic axes), excluding the spacing factor.
    double node_weight(int a, int i) const;

    void unflatten(std::size_t flat, int* idx) const;
    std::size_t flatten(const int* idx) const;
    void coords(std::size_t flat, double* x) const;

    bool operator==(const GridSpec& o) const;

private:
    std::vector<AxisSpec> axes_;
};

// Complex samples of a function on a GridSpec at a fixed hbar.
struct SampledField {
    GridSpec grid;
    std::vector<cdouble> values;
    double hbar = 1.0;
    std::vector<std::string> warnings; // non-fatal guard notes (node spacing etc.)

    SampledField() = default;
    SampledField(GridSpec g, double hb); // zero-filled
    SampledField(GridSpec g, std::vector<cdouble> v, double hb);

    void check() const; // size match, finite entries, hbar in (0, 1]
};

// Tensor-product trapezoid/rectangle quadrature of the samples, accumulated
// with pairwise summation in flat (axis-major) order.
cdouble integrate_field(const SampledField& f);

// L2 norm sqrt(integral |f|^2).
double field_l2_norm(const SampledField& f);

// Strictly decreasing list of hbar values in (0, 1].
struct HbarSchedule {
    std::vector<double> values;
    explicit HbarSchedule(std::vector<double> v);
    static HbarSchedule standard(int n); // {1e-2,3e-3,1e-3,3e-4,1e-4}, n=2 stops at 1e-3
};

// Convenience builders.
GridSpec make_box_grid(const std::vector<double>& lo, const std::vector<double>& hi,
                       const std::vector<int>& m);
GridSpec make_torus_grid(int n, double period, int m);

} // namespace isotropica
