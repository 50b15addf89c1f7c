#include "fbsc/grid.hpp"

#include <cmath>

namespace fbsc {

Grid::Grid(Vec lo, Vec hi, std::vector<int> nodes_per_axis, int time_steps,
           double horizon, double trust_margin)
    : lo_(std::move(lo)),
      hi_(std::move(hi)),
      nodes_(std::move(nodes_per_axis)),
      time_steps_(time_steps),
      horizon_(horizon),
      trust_margin_(trust_margin) {
    const int d = static_cast<int>(lo_.size());
    if (d < 1 || d > 3)
        throw std::invalid_argument("Grid: spatial dimension must be 1..3");
    if (hi_.size() != d || static_cast<int>(nodes_.size()) != d)
        throw std::invalid_argument("Grid: lo/hi/nodes dimension mismatch");
    if (time_steps_ < 1) throw std::invalid_argument("Grid: time_steps must be >= 1");
    if (!(horizon_ > 0.0)) throw std::invalid_argument("Grid: horizon must be > 0");
    if (!(trust_margin_ >= 0.0 && trust_margin_ < 0.5))
        throw std::invalid_argument("Grid: trust_margin must lie in [0, 0.5)");

    spacing_ = Vec(d);
    strides_.assign(d, 1);
    node_count_ = 1;
    for (int i = 0; i < d; ++i) {
        if (nodes_[i] < 3) throw std::invalid_argument("Grid: need >= 3 nodes per axis");
        if (!(lo_[i] < hi_[i])) throw std::invalid_argument("Grid: lo must be < hi");
        spacing_[i] = (hi_[i] - lo_[i]) / (nodes_[i] - 1);
    }
    // axis 0 varies slowest
    for (int i = d - 1; i >= 0; --i) {
        strides_[i] = node_count_;
        node_count_ *= static_cast<std::size_t>(nodes_[i]);
    }
}

Vec Grid::node(std::size_t j) const {
    Vec x(dim());
    for (int i = 0; i < dim(); ++i) x[i] = lo_[i] + spacing_[i] * axis_index(j, i);
    return x;
}

std::size_t Grid::nearest_node(const Vec& x) const {
    std::size_t flat = 0;
    for (int i = 0; i < dim(); ++i) {
        const double xi = std::min(std::max(x[i], lo_[i]), hi_[i]);
        int idx = static_cast<int>(std::lround((xi - lo_[i]) / spacing_[i]));
        idx = std::min(std::max(idx, 0), nodes_[i] - 1);
        flat += strides_[i] * static_cast<std::size_t>(idx);
    }
    return flat;
}

bool Grid::inside(const Vec& x) const {
    for (int i = 0; i < dim(); ++i)
        if (x[i] < lo_[i] || x[i] > hi_[i]) return false;
    return true;
}

Vec Grid::trust_lo() const { return lo_ + trust_margin_ * (hi_ - lo_); }
Vec Grid::trust_hi() const { return hi_ - trust_margin_ * (hi_ - lo_); }

bool Grid::in_trust_region(const Vec& x) const {
    const Vec tlo = trust_lo(), thi = trust_hi();
    for (int i = 0; i < dim(); ++i)
        if (x[i] < tlo[i] || x[i] > thi[i]) return false;
    return true;
}

ValueField::ValueField(Grid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    const std::size_t expected =
        static_cast<std::size_t>(grid_.time_steps() + 1) * grid_.node_count();
    if (values_.size() != expected)
        throw std::invalid_argument("ValueField: value array size mismatch");
    for (double v : values_)
        if (!std::isfinite(v)) throw std::invalid_argument("ValueField: non-finite value");
}

QueryResult ValueField::query(double t, const Vec& x) const {
    const double T = grid_.horizon();
    if (t < -1e-12 || t > T + 1e-12)
        throw std::out_of_range("ValueField::query: t outside [0, horizon]");
    t = std::min(std::max(t, 0.0), T);

    QueryResult out;
    const int d = grid_.dim();
    Vec xc(d);
    for (int i = 0; i < d; ++i) {
        xc[i] = std::min(std::max(x[i], grid_.lo()[i]), grid_.hi()[i]);
        if (xc[i] != x[i]) out.clamped = true;
    }

    // base cell + weights per axis
    std::vector<int> base(d);
    std::vector<double> w(d);
    for (int i = 0; i < d; ++i) {
        const double rel = (xc[i] - grid_.lo()[i]) / grid_.spacing()[i];
        int b = static_cast<int>(std::floor(rel));
        b = std::min(std::max(b, 0), grid_.nodes_per_axis()[i] - 2);
        base[i] = b;
        w[i] = rel - b;
    }

    const double dt = grid_.dt();
    const double kt = t / dt;
    int k0 = static_cast<int>(std::floor(kt));
    k0 = std::min(std::max(k0, 0), grid_.time_steps() - 1);
    const double wt = kt - k0;

    auto interp_slice = [&](const double* s) {
        double acc = 0.0;
        const int corners = 1 << d;
        for (int c = 0; c < corners; ++c) {
            double weight = 1.0;
            std::size_t flat = 0;
            for (int i = 0; i < d; ++i) {
                const int bit = (c >> i) & 1;
                weight *= bit ? w[i] : (1.0 - w[i]);
                flat += grid_.stride(i) * static_cast<std::size_t>(base[i] + bit);
            }
            acc += weight * s[flat];
        }
        return acc;
    };

    const double v0 = interp_slice(slice(k0));
    const double v1 = interp_slice(slice(k0 + 1));
    out.value = (1.0 - wt) * v0 + wt * v1;
    return out;
}

ValueField sample_field(const Grid& grid, const ScalarTXFn& fn) {
    std::vector<double> values(static_cast<std::size_t>(grid.time_steps() + 1) *
                               grid.node_count());
    for (int k = 0; k <= grid.time_steps(); ++k) {
        const double t = grid.time(k);
        for (std::size_t j = 0; j < grid.node_count(); ++j)
            values[static_cast<std::size_t>(k) * grid.node_count() + j] = fn(t, grid.node(j));
    }
    return ValueField(grid, std::move(values));
}

FeedbackPolicy::FeedbackPolicy(Grid grid, ControlSet controls,
                               std::vector<std::uint32_t> indices)
    : grid_(std::move(grid)), controls_(std::move(controls)), indices_(std::move(indices)) {
    const std::size_t expected =
        static_cast<std::size_t>(grid_.time_steps() + 1) * grid_.node_count();
    if (indices_.size() != expected)
        throw std::invalid_argument("FeedbackPolicy: index array size mismatch");
    for (std::uint32_t i : indices_)
        if (i >= controls_.size())
            throw std::invalid_argument("FeedbackPolicy: control index out of range");
}

std::pair<Vec, bool> FeedbackPolicy::query(double t, const Vec& x) const {
    const bool clamped = !grid_.inside(x);
    int k = static_cast<int>(std::lround(t / grid_.dt()));
    k = std::min(std::max(k, 0), grid_.time_steps());
    const std::size_t j = grid_.nearest_node(x);
    return {control_at(k, j), clamped};
}

}  // namespace fbsc
