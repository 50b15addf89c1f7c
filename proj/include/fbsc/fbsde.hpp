#pragma once

#include <variant>
#include <vector>

#include "fbsc/grid.hpp"
#include "fbsc/model.hpp"

namespace fbsc {

struct ConstantControl {
    Vec u;
};
/// One control vector per mesh step, shared by all paths.
struct OpenLoopControl {
    std::vector<Vec> per_step;
};
/// Closed loop: policy queried at (t_k, X_k), nearest node. Non-owning.
struct PolicyControl {
    const FeedbackPolicy* policy = nullptr;
};
using ControlLaw = std::variant<ConstantControl, OpenLoopControl, PolicyControl>;

/// Monte Carlo ensemble of (X, dW, u) on a uniform mesh from (s, y) to the
/// horizon, plus (Y, Z) once the backward pass has run. Path p draws its
/// increments from substream (seed, p), step-major within the path, so a
/// bundle is reproducible bit-for-bit for any thread count.
struct PathBundle {
    double start_time = 0.0;
    Vec start_state;
    double dt = 0.0;
    int steps = 0;  // mesh t_k = start_time + k*dt, k = 0..steps
    int paths = 0;
    int dim = 0;
    int control_dim = 0;
    std::uint64_t seed = 0;

    std::vector<double> x;   // [p][k][i], k = 0..steps
    std::vector<double> dw;  // [p][k][i], k = 0..steps-1
    std::vector<double> u;   // [p][k][i], k = 0..steps-1
    std::vector<double> y;   // [p][k],    k = 0..steps   (backward pass)
    std::vector<double> z;   // [p][k][i], k = 0..steps-1 (backward pass)
    bool backward_done = false;
    /// True when the diffusion evaluated to exactly zero everywhere along
    /// the simulation; the backward pass is then pathwise deterministic.
    bool deterministic = false;
    std::vector<int> clamp_counts;  // per path, feedback queries clamped
    int regression_fallbacks = 0;   // rank-deficient cells that used the mean

    double time(int k) const { return start_time + dt * k; }
    double xval(int p, int k, int i) const {
        return x[(static_cast<std::size_t>(p) * (steps + 1) + k) * dim + i];
    }
    Vec state(int p, int k) const {
        Vec v(dim);
        for (int i = 0; i < dim; ++i) v[i] = xval(p, k, i);
        return v;
    }
    double dwval(int p, int k, int i) const {
        return dw[(static_cast<std::size_t>(p) * steps + k) * dim + i];
    }
    Vec control(int p, int k) const {
        Vec v(control_dim);
        for (int i = 0; i < control_dim; ++i)
            v[i] = u[(static_cast<std::size_t>(p) * steps + k) * control_dim + i];
        return v;
    }
    double yval(int p, int k) const {
        return y[static_cast<std::size_t>(p) * (steps + 1) + k];
    }
    double zval(int p, int k, int i) const {
        return z[(static_cast<std::size_t>(p) * steps + k) * dim + i];
    }
};

struct RegressionOptions {
    enum class Basis { Cells, Poly };
    Basis basis = Basis::Cells;
    int cells_per_axis = 32;
    int max_cells = 4096;
    int poly_degree = 1;
};

struct CostEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
};

/// Euler-Maruyama simulation of the forward equation from (s, y):
///   X_{k+1} = X_k + b(t_k, X_k, u_k) dt + sigma(t_k, X_k, u_k) dW_k.
/// Requires s < horizon, dt dividing horizon - s within 1e-12, paths >= 1.
/// Feedback queries outside the policy's box are clamped and counted.
PathBundle simulate_forward(const ControlProblem& problem, const ControlLaw& control,
                            double s, const Vec& y, int paths, double dt,
                            std::uint64_t seed);

/// Backward least-squares pass along the bundle:
///   Y_N = Phi(X_N);  Z_k = E[Y_{k+1} dW_k | X_k] / dt;
///   Y_k = E[Y_{k+1} + dt f(t_k, X_k, Y_{k+1}, Z_k, u_k) | X_k],
/// with E the projection onto a piecewise-linear hypercube-cell basis (or a
/// global polynomial). Returns the cost estimate Y(s): cross-path mean of
/// Y_0 with the standard error of the step-0 regression targets. A zero
/// diffusion skips the regression (conditional expectation is the identity,
/// Z = 0).
CostEstimate solve_bsde(const ControlProblem& problem, PathBundle& bundle,
                        const RegressionOptions& options = {});

/// simulate_forward + solve_bsde; returns the cost J(s, y; control) = Y(s).
CostEstimate estimate_cost(const ControlProblem& problem, const ControlLaw& control,
                           double s, const Vec& y, int paths, double dt,
                           std::uint64_t seed, const RegressionOptions& options = {});

/// Flow consistency statistic: max over mesh steps of the cross-path mean of
/// |Y_k - field(t_k, X_k)|. Small values certify the dynamic-programming
/// identity along the bundle's control.
double dpp_consistency(const ControlProblem& problem, const ValueField& field,
                       const PathBundle& bundle);

/// Largest absolute z-score of the increment sample moments (mean 0,
/// covariance dt I); used by statistical sanity checks.
double increment_moment_zscore(const PathBundle& bundle);

}  // namespace fbsc
