#pragma once

#include <vector>

#include "fbsc/common.hpp"
#include "fbsc/model.hpp"

namespace fbsc {

/// Uniform tensor grid over a truncated box [lo, hi], plus a uniform time
/// mesh with time_steps intervals on [0, horizon]. Spatial dimension is
/// capped at 3; memory grows geometrically beyond desk scale.
class Grid {
public:
    Grid(Vec lo, Vec hi, std::vector<int> nodes_per_axis, int time_steps,
         double horizon, double trust_margin = 0.15);

    int dim() const { return static_cast<int>(lo_.size()); }
    const Vec& lo() const { return lo_; }
    const Vec& hi() const { return hi_; }
    const std::vector<int>& nodes_per_axis() const { return nodes_; }
    const Vec& spacing() const { return spacing_; }
    double max_spacing() const { return spacing_.maxCoeff(); }
    int time_steps() const { return time_steps_; }
    double horizon() const { return horizon_; }
    double dt() const { return horizon_ / time_steps_; }
    double time(int k) const { return dt() * k; }
    double trust_margin() const { return trust_margin_; }

    std::size_t node_count() const { return node_count_; }
    std::size_t stride(int axis) const { return strides_[axis]; }

    /// Coordinates of the node with flat index j.
    Vec node(std::size_t j) const;
    /// Per-axis index of flat node j along `axis`.
    int axis_index(std::size_t j, int axis) const {
        return static_cast<int>((j / strides_[axis]) % static_cast<std::size_t>(nodes_[axis]));
    }
    /// Flat index of the node nearest to x (x clamped to the box first).
    std::size_t nearest_node(const Vec& x) const;

    bool inside(const Vec& x) const;
    /// Interior sub-box excluding trust_margin * (hi-lo) per side.
    bool in_trust_region(const Vec& x) const;
    Vec trust_lo() const;
    Vec trust_hi() const;

private:
    Vec lo_, hi_, spacing_;
    std::vector<int> nodes_;
    std::vector<std::size_t> strides_;
    std::size_t node_count_ = 0;
    int time_steps_ = 0;
    double horizon_ = 0.0;
    double trust_margin_ = 0.15;
};

struct QueryResult {
    double value = 0.0;
    bool clamped = false;  // x was outside the box and clamped to it
};

/// Grid-sampled scalar field v(t_k, x_j): time-major storage, slice k holds
/// node_count values. Slice time_steps is the terminal slice.
class ValueField {
public:
    ValueField(Grid grid, std::vector<double> values);

    const Grid& grid() const { return grid_; }
    double at(int k, std::size_t j) const {
        return values_[static_cast<std::size_t>(k) * grid_.node_count() + j];
    }
    const std::vector<double>& values() const { return values_; }

    /// Multilinear interpolation in space, linear in time. x outside the box
    /// is clamped (flagged, not fatal); t must lie in [0, horizon] up to
    /// rounding slack.
    QueryResult query(double t, const Vec& x) const;

private:
    const double* slice(int k) const { return values_.data() + static_cast<std::size_t>(k) * grid_.node_count(); }
    Grid grid_;
    std::vector<double> values_;
};

/// Samples an analytic function v(t, x) onto a grid.
ValueField sample_field(const Grid& grid, const ScalarTXFn& fn);

/// Grid-sampled feedback map (t_k, x_j) -> control-set index.
class FeedbackPolicy {
public:
    FeedbackPolicy(Grid grid, ControlSet controls, std::vector<std::uint32_t> indices);

    const Grid& grid() const { return grid_; }
    const ControlSet& controls() const { return controls_; }
    std::uint32_t index_at(int k, std::size_t j) const {
        return indices_[static_cast<std::size_t>(k) * grid_.node_count() + j];
    }
    const Vec& control_at(int k, std::size_t j) const { return controls_[index_at(k, j)]; }

    /// Control applied at (t, x): nearest spatial node, nearest time slice.
    /// Returns a clamp flag when x lies outside the grid box.
    std::pair<Vec, bool> query(double t, const Vec& x) const;

private:
    Grid grid_;
    ControlSet controls_;
    std::vector<std::uint32_t> indices_;
};

}  // namespace fbsc
