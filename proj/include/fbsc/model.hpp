#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fbsc/common.hpp"

namespace fbsc {

/// Finite control set: an explicit, duplicate-free, ordered list of points
/// in R^m. Minimisers are always resolved by the first index in this order.
class ControlSet {
public:
    explicit ControlSet(std::vector<Vec> points);

    /// Lattice discretisation of the axis-aligned box [lo, hi] with
    /// points_per_axis samples per axis (endpoints included), sorted
    /// lexicographically. Produces points_per_axis^m points.
    static ControlSet lattice(const Vec& lo, const Vec& hi, int points_per_axis);

    std::size_t size() const { return points_.size(); }
    int dim() const { return dim_; }
    const Vec& operator[](std::size_t i) const { return points_[i]; }
    const std::vector<Vec>& points() const { return points_; }

    /// Index of the point closest to u (Euclidean), first index on ties.
    std::size_t nearest(const Vec& u) const;

private:
    std::vector<Vec> points_;
    int dim_ = 0;
};

using DriftFn = std::function<Vec(double t, const Vec& x, const Vec& u)>;
using DiffusionFn = std::function<Mat(double t, const Vec& x, const Vec& u)>;
using GeneratorFn =
    std::function<double(double t, const Vec& x, double y, const Vec& z, const Vec& u)>;
using TerminalFn = std::function<double(const Vec& x)>;
using ScalarTXFn = std::function<double(double t, const Vec& x)>;
using PolicyTXFn = std::function<Vec(double t, const Vec& x)>;

/// A controlled forward-backward system on [0, horizon]:
///   dX = drift dt + diffusion dW,   dY = -generator dt + Z dW,
///   Y(T) = terminal(X(T)).
/// The Brownian motion has the same dimension as the state; diffusion is
/// a d x d matrix. All evaluators must be pure and re-entrant.
struct ControlProblem {
    int state_dim = 1;
    int control_dim = 1;
    double horizon = 1.0;
    DriftFn drift;
    DiffusionFn diffusion;
    GeneratorFn generator;
    TerminalFn terminal;
    ControlSet control_set{std::vector<Vec>{}};
    std::optional<double> lipschitz_bound;

    std::string name = "custom";
    /// Closed-form value/policy where known (builtin fixtures only).
    ScalarTXFn exact_value;
    PolicyTXFn exact_policy;

    /// Throws std::invalid_argument on malformed dimensions or horizon.
    void validate() const;
};

struct LipschitzRatio {
    double observed = 0.0;   // max |g(a)-g(a')| / ||a-a'|| over sampled pairs
    double at_distance = 0.0;
};

/// Sampled Lipschitz diagnostics for (drift, diffusion, generator, terminal).
struct LipschitzReport {
    LipschitzRatio drift;
    LipschitzRatio diffusion;
    LipschitzRatio generator;
    LipschitzRatio terminal;
    std::optional<double> declared;
    bool violation = false;  // observed > 1.01 * declared for some coefficient
    std::string detail;      // offending coefficient / evaluator failure text
};

struct SampleBox {
    Vec lo;
    Vec hi;
};

/// Estimates the Lipschitz ratios of the four problem coefficients from
/// `samples` random point pairs. States are drawn from `box` (default
/// [-5,5]^d), controls from the problem's control set, the generator's
/// (y, z) arguments from [-5,5]. Each pair shares its time sample, matching
/// the uniform-in-t form of the assumed bounds. Evaluator failures are
/// reported with the offending input, not swallowed.
LipschitzReport lipschitz_probe(const ControlProblem& problem, int samples,
                                std::uint64_t seed,
                                const std::optional<SampleBox>& box = std::nullopt);

/// Built-in benchmark problems with closed-form solutions:
///   "lq1d"         b=u, sigma=1, f=u^2, Phi=x^2, U=[-3,3], T=1;
///                  v(t,x) = x^2/(1+T-t) + ln(1+T-t), u*(t,x) = -x/(1+T-t).
///   "kink1d"       b=u, sigma=0, f=0, Phi=-|x|, U=[-1,1], T=1;
///                  v(t,x) = -(|x| + T - t), non-smooth at x=0.
///   "martingale1d" b=0, sigma=1, f=0, Phi=x; v(t,x) = x.
/// Throws std::invalid_argument for unknown names, listing the fixtures.
ControlProblem builtin(const std::string& name);

/// Same fixtures with a nonstandard horizon; the closed-form solutions are
/// parametric in T and adapt.
ControlProblem builtin(const std::string& name, double horizon);

}  // namespace fbsc
