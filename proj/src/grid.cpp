#include "isotropica/grid.hpp"

#include <algorithm>
#include <cmath>

#include "isotropica/parallel.hpp"

namespace isotropica {

GridSpec::GridSpec(std::vector<AxisSpec> axes) : axes_(std::move(axes)) {
    require_arg(!axes_.empty(), "grid must have at least one axis");
    for (const auto& a : axes_) {
        require_arg(a.m >= 2, "grid axis needs at least 2 samples");
        require_arg(std::isfinite(a.lo) && std::isfinite(a.hi) && a.hi > a.lo,
                    "grid axis bounds must be finite with hi > lo");
    }
}

std::size_t GridSpec::size() const {
    std::size_t s = 1;
    for (const auto& a : axes_) s *= static_cast<std::size_t>(a.m);
    return s;
}

double GridSpec::spacing(int a) const {
    const AxisSpec& ax = axes_[a];
    return ax.periodic ? (ax.hi - ax.lo) / ax.m : (ax.hi - ax.lo) / (ax.m - 1);
}

double GridSpec::point(int a, int i) const { return axes_[a].lo + spacing(a) * i; }

double GridSpec::cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < dim(); ++a) v *= spacing(a);
    return v;
}

double GridSpec::node_weight(int a, int i) const {
    if (axes_[a].periodic) return 1.0;
    return (i == 0 || i == axes_[a].m - 1) ? 0.5 : 1.0;
}

void GridSpec::unflatten(std::size_t flat, int* idx) const {
    for (int a = dim() - 1; a >= 0; --a) {
        idx[a] = static_cast<int>(flat % axes_[a].m);
        flat /= axes_[a].m;
    }
}

std::size_t GridSpec::flatten(const int* idx) const {
    std::size_t f = 0;
    for (int a = 0; a < dim(); ++a) f = f * axes_[a].m + idx[a];
    return f;
}

void GridSpec::coords(std::size_t flat, double* x) const {
    for (int a = dim() - 1; a >= 0; --a) {
        x[a] = point(a, static_cast<int>(flat % axes_[a].m));
        flat /= axes_[a].m;
    }
}

bool GridSpec::operator==(const GridSpec& o) const {
    if (axes_.size() != o.axes_.size()) return false;
    for (std::size_t a = 0; a < axes_.size(); ++a) {
        if (axes_[a].lo != o.axes_[a].lo || axes_[a].hi != o.axes_[a].hi ||
            axes_[a].m != o.axes_[a].m || axes_[a].periodic != o.axes_[a].periodic)
            return false;
    }
    return true;
}

SampledField::SampledField(GridSpec g, double hb)
    : grid(std::move(g)), values(grid.size(), cdouble{0.0, 0.0}), hbar(hb) {
    require_arg(hbar > 0.0 && hbar <= 1.0, "hbar must lie in (0, 1]");
}

SampledField::SampledField(GridSpec g, std::vector<cdouble> v, double hb)
    : grid(std::move(g)), values(std::move(v)), hbar(hb) {
    check();
}

void SampledField::check() const {
    require_arg(hbar > 0.0 && hbar <= 1.0, "hbar must lie in (0, 1]");
    require_arg(values.size() == grid.size(), "sample count does not match grid size");
    for (const cdouble& z : values)
        require_arg(std::isfinite(z.real()) && std::isfinite(z.imag()),
                    "field contains a non-finite sample");
}

cdouble integrate_field(const SampledField& f) {
    f.check();
    const GridSpec& g = f.grid;
    const int d = g.dim();
    const std::size_t n = g.size();

    bool any_boxed = false;
    for (int a = 0; a < d; ++a) any_boxed |= !g.axis(a).periodic;

    std::vector<cdouble> terms(n);
    if (!any_boxed) {
        std::copy(f.values.begin(), f.values.end(), terms.begin());
    } else {
        std::vector<int> idx(d);
        for (std::size_t i = 0; i < n; ++i) {
            g.unflatten(i, idx.data());
            double w = 1.0;
            for (int a = 0; a < d; ++a) w *= g.node_weight(a, idx[a]);
            terms[i] = f.values[i] * w;
        }
    }
    return pairwise_sum(terms) * g.cell_volume();
}

double field_l2_norm(const SampledField& f) {
    f.check();
    const GridSpec& g = f.grid;
    const int d = g.dim();
    const std::size_t n = g.size();
    std::vector<double> terms(n);
    std::vector<int> idx(d);
    for (std::size_t i = 0; i < n; ++i) {
        g.unflatten(i, idx.data());
        double w = 1.0;
        for (int a = 0; a < d; ++a) w *= g.node_weight(a, idx[a]);
        terms[i] = std::norm(f.values[i]) * w;
    }
    return std::sqrt(pairwise_sum(terms.data(), n) * g.cell_volume());
}

HbarSchedule::HbarSchedule(std::vector<double> v) : values(std::move(v)) {
    require_arg(!values.empty(), "hbar schedule must be non-empty");
    for (std::size_t i = 0; i < values.size(); ++i) {
        require_arg(values[i] > 0.0 && values[i] <= 1.0, "hbar values must lie in (0, 1]");
        if (i) require_arg(values[i] < values[i - 1], "hbar schedule must strictly decrease");
    }
}

HbarSchedule HbarSchedule::standard(int n) {
    require_arg(n >= 1, "dimension must be positive");
    if (n >= 2) return HbarSchedule({1e-2, 3e-3, 1e-3});
    return HbarSchedule({1e-2, 3e-3, 1e-3, 3e-4, 1e-4});
}

GridSpec make_box_grid(const std::vector<double>& lo, const std::vector<double>& hi,
                       const std::vector<int>& m) {
    require_arg(lo.size() == hi.size() && lo.size() == m.size(),
                "box grid: lo/hi/m lengths differ");
    std::vector<AxisSpec> axes(lo.size());
    for (std::size_t a = 0; a < lo.size(); ++a) axes[a] = {lo[a], hi[a], m[a], false};
    return GridSpec(std::move(axes));
}

GridSpec make_torus_grid(int n, double period, int m) {
    std::vector<AxisSpec> axes(n);
    for (int a = 0; a < n; ++a) axes[a] = {0.0, period, m, true};
    return GridSpec(std::move(axes));
}

} // namespace isotropica
