#include "fbsc/fbsde.hpp"

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <sstream>

#include "fbsc/rng.hpp"

namespace fbsc {

namespace {

int mesh_steps(double span, double dt) {
    const int n = static_cast<int>(std::lround(span / dt));
    if (n < 1 || std::abs(n * dt - span) > 1e-12 * std::max(1.0, span))
        throw std::invalid_argument("simulate_forward: dt must divide horizon - s");
    return n;
}

}  // namespace

PathBundle simulate_forward(const ControlProblem& problem, const ControlLaw& control,
                            double s, const Vec& y, int paths, double dt,
                            std::uint64_t seed) {
    problem.validate();
    if (!(s < problem.horizon))
        throw std::invalid_argument("simulate_forward: start time must precede horizon");
    if (paths < 1) throw std::invalid_argument("simulate_forward: paths must be >= 1");
    if (y.size() != problem.state_dim)
        throw std::invalid_argument("simulate_forward: start state dimension mismatch");
    if (const auto* ol = std::get_if<OpenLoopControl>(&control)) {
        const int n = mesh_steps(problem.horizon - s, dt);
        if (static_cast<int>(ol->per_step.size()) != n)
            throw std::invalid_argument("simulate_forward: open-loop sequence length mismatch");
    }

    PathBundle b;
    b.start_time = s;
    b.start_state = y;
    b.dt = dt;
    b.steps = mesh_steps(problem.horizon - s, dt);
    b.paths = paths;
    b.dim = problem.state_dim;
    b.control_dim = problem.control_dim;
    b.seed = seed;
    const std::size_t np = static_cast<std::size_t>(paths);
    b.x.resize(np * (b.steps + 1) * b.dim);
    b.dw.resize(np * b.steps * b.dim);
    b.u.resize(np * b.steps * b.control_dim);
    b.clamp_counts.assign(paths, 0);

    std::atomic<bool> noise_seen{false};

    parallel_for(np, [&](std::size_t p) {
        Rng rng(substream_seed(seed, p));
        Vec xk = y;
        double* xrow = b.x.data() + p * (b.steps + 1) * b.dim;
        double* dwrow = b.dw.data() + p * b.steps * b.dim;
        double* urow = b.u.data() + p * b.steps * b.control_dim;
        for (int i = 0; i < b.dim; ++i) xrow[i] = xk[i];

        bool local_noise = false;
        for (int k = 0; k < b.steps; ++k) {
            const double t = b.time(k);
            Vec uk;
            if (const auto* cc = std::get_if<ConstantControl>(&control)) {
                uk = cc->u;
            } else if (const auto* ol = std::get_if<OpenLoopControl>(&control)) {
                uk = ol->per_step[k];
            } else {
                const auto& pc = std::get<PolicyControl>(control);
                auto [u, clamped] = pc.policy->query(t, xk);
                uk = u;
                if (clamped) ++b.clamp_counts[p];
            }
            for (int i = 0; i < b.control_dim; ++i) urow[k * b.control_dim + i] = uk[i];

            Vec dwk(b.dim);
            for (int i = 0; i < b.dim; ++i) dwk[i] = rng.normal() * std::sqrt(dt);
            for (int i = 0; i < b.dim; ++i) dwrow[k * b.dim + i] = dwk[i];

            const Vec drift = problem.drift(t, xk, uk);
            const Mat sigma = problem.diffusion(t, xk, uk);
            if (sigma.cwiseAbs().maxCoeff() != 0.0) local_noise = true;
            xk = xk + drift * dt + sigma * dwk;
            for (int i = 0; i < b.dim; ++i) xrow[(k + 1) * b.dim + i] = xk[i];
        }
        if (local_noise) noise_seen.store(true, std::memory_order_relaxed);
    });

    b.deterministic = !noise_seen.load();
    for (double v : b.x)
        if (!std::isfinite(v))
            throw std::runtime_error("simulate_forward: non-finite state encountered");
    return b;
}

namespace {

/// Piecewise-linear regression on a hypercube partition of the occupied
/// state range. Cells with a rank-deficient design fall back to their mean.
class CellRegression {
public:
    CellRegression(const PathBundle& b, int k, const RegressionOptions& opt) : b_(b), k_(k) {
        const int d = b.dim;
        lo_ = Vec::Constant(d, std::numeric_limits<double>::infinity());
        hi_ = Vec::Constant(d, -std::numeric_limits<double>::infinity());
        for (int p = 0; p < b.paths; ++p)
            for (int i = 0; i < d; ++i) {
                lo_[i] = std::min(lo_[i], b.xval(p, k, i));
                hi_[i] = std::max(hi_[i], b.xval(p, k, i));
            }
        per_axis_ = opt.cells_per_axis;
        while (per_axis_ > 1 && std::pow(per_axis_, d) > opt.max_cells) --per_axis_;
        cells_ = 1;
        for (int i = 0; i < d; ++i) cells_ *= per_axis_;

        cell_of_.resize(b.paths);
        for (int p = 0; p < b.paths; ++p) {
            std::size_t c = 0;
            for (int i = 0; i < d; ++i) {
                const double w = hi_[i] - lo_[i];
                int ci = 0;
                if (w > 0.0) {
                    ci = static_cast<int>((b.xval(p, k, i) - lo_[i]) / w * per_axis_);
                    ci = std::min(std::max(ci, 0), per_axis_ - 1);
                }
                c = c * per_axis_ + static_cast<std::size_t>(ci);
            }
            cell_of_[p] = c;
        }
        members_.resize(cells_);
        for (int p = 0; p < b.paths; ++p) members_[cell_of_[p]].push_back(p);
    }

    /// Least-squares projection of targets onto (1, x) per cell; fills
    /// predictions path-by-path. Returns the number of mean fallbacks.
    int fit(const std::vector<double>& targets, std::vector<double>& predictions) const {
        const int d = b_.dim;
        int fallbacks = 0;
        for (const auto& cell : members_) {
            if (cell.empty()) continue;
            const int n = static_cast<int>(cell.size());
            if (n >= d + 2) {
                Mat design(n, d + 1);
                Vec rhs(n);
                for (int r = 0; r < n; ++r) {
                    design(r, 0) = 1.0;
                    for (int i = 0; i < d; ++i) design(r, i + 1) = b_.xval(cell[r], k_, i);
                    rhs[r] = targets[cell[r]];
                }
                Eigen::ColPivHouseholderQR<Mat> qr(design);
                qr.setThreshold(1e-10);
                if (qr.rank() == d + 1) {
                    const Vec coef = qr.solve(rhs);
                    for (int r = 0; r < n; ++r) {
                        double v = coef[0];
                        for (int i = 0; i < d; ++i) v += coef[i + 1] * design(r, i + 1);
                        predictions[cell[r]] = v;
                    }
                    continue;
                }
            }
            ++fallbacks;
            double mean = 0.0;
            for (int p : cell) mean += targets[p];
            mean /= n;
            for (int p : cell) predictions[p] = mean;
        }
        return fallbacks;
    }

private:
    const PathBundle& b_;
    int k_;
    Vec lo_, hi_;
    int per_axis_ = 1;
    std::size_t cells_ = 1;
    std::vector<std::size_t> cell_of_;
    std::vector<std::vector<int>> members_;
};

/// Global polynomial regression of total degree <= poly_degree on
/// standardised coordinates.
class PolyRegression {
public:
    PolyRegression(const PathBundle& b, int k, const RegressionOptions& opt) : b_(b), k_(k) {
        const int d = b.dim;
        mean_ = Vec::Zero(d);
        scale_ = Vec::Ones(d);
        for (int p = 0; p < b.paths; ++p)
            for (int i = 0; i < d; ++i) mean_[i] += b.xval(p, k, i);
        mean_ /= b.paths;
        Vec var = Vec::Zero(d);
        for (int p = 0; p < b.paths; ++p)
            for (int i = 0; i < d; ++i) {
                const double c = b.xval(p, k, i) - mean_[i];
                var[i] += c * c;
            }
        for (int i = 0; i < d; ++i)
            scale_[i] = var[i] > 0.0 ? std::sqrt(var[i] / b.paths) : 1.0;

        std::vector<int> expo(d, 0);
        enumerate(expo, 0, opt.poly_degree);
    }

    int fit(const std::vector<double>& targets, std::vector<double>& predictions) const {
        const int n = b_.paths;
        const int m = static_cast<int>(exponents_.size());
        Mat design(n, m);
        for (int p = 0; p < n; ++p)
            for (int c = 0; c < m; ++c) design(p, c) = basis_value(p, c);
        Vec rhs(n);
        for (int p = 0; p < n; ++p) rhs[p] = targets[p];
        Eigen::ColPivHouseholderQR<Mat> qr(design);
        qr.setThreshold(1e-10);
        if (qr.rank() < m) {
            double mean = 0.0;
            for (int p = 0; p < n; ++p) mean += targets[p];
            mean /= n;
            for (int p = 0; p < n; ++p) predictions[p] = mean;
            return 1;
        }
        const Vec coef = qr.solve(rhs);
        for (int p = 0; p < n; ++p) {
            double v = 0.0;
            for (int c = 0; c < m; ++c) v += coef[c] * basis_value(p, c);
            predictions[p] = v;
        }
        return 0;
    }

private:
    void enumerate(std::vector<int>& expo, int axis, int budget) {
        if (axis == static_cast<int>(expo.size())) {
            exponents_.push_back(expo);
            return;
        }
        for (int e = 0; e <= budget; ++e) {
            expo[axis] = e;
            enumerate(expo, axis + 1, budget - e);
        }
        expo[axis] = 0;
    }
    double basis_value(int p, int c) const {
        double v = 1.0;
        for (int i = 0; i < b_.dim; ++i) {
            const double xi = (b_.xval(p, k_, i) - mean_[i]) / scale_[i];
            for (int e = 0; e < exponents_[c][i]; ++e) v *= xi;
        }
        return v;
    }

    const PathBundle& b_;
    int k_;
    Vec mean_, scale_;
    std::vector<std::vector<int>> exponents_;
};

}  // namespace

CostEstimate solve_bsde(const ControlProblem& problem, PathBundle& bundle,
                        const RegressionOptions& options) {
    const int n = bundle.steps;
    const int m = bundle.paths;
    const std::size_t np = static_cast<std::size_t>(m);
    bundle.y.assign(np * (n + 1), 0.0);
    bundle.z.assign(np * n * bundle.dim, 0.0);
    bundle.regression_fallbacks = 0;

    auto yref = [&](int p, int k) -> double& {
        return bundle.y[static_cast<std::size_t>(p) * (n + 1) + k];
    };
    auto zref = [&](int p, int k, int i) -> double& {
        return bundle.z[(static_cast<std::size_t>(p) * n + k) * bundle.dim + i];
    };

    // Pathwise payoff accumulation Phi(X_N) + sum dt f(...): all fits keep
    // the cross-path mean, so its mean equals mean(Y_0) and its spread is the
    // Monte Carlo noise of the estimate.
    std::vector<double> payoff(m);
    for (int p = 0; p < m; ++p) {
        yref(p, n) = problem.terminal(bundle.state(p, n));
        payoff[p] = yref(p, n);
    }

    const double dt = bundle.dt;
    std::vector<double> targets(m), predictions(m);

    for (int k = n - 1; k >= 0; --k) {
        const double t = bundle.time(k);

        if (bundle.deterministic) {
            // Single-trajectory conditional expectation is the identity; the
            // backward equation degenerates to an ODE with Z = 0.
            parallel_for(np, [&](std::size_t p) {
                const int pi = static_cast<int>(p);
                const double ynext = yref(pi, k + 1);
                const Vec zk = Vec::Zero(bundle.dim);
                const double fval = problem.generator(t, bundle.state(pi, k), ynext, zk,
                                                      bundle.control(pi, k));
                yref(pi, k) = ynext + dt * fval;
                payoff[p] += dt * fval;
            });
            continue;
        }

        std::variant<CellRegression, PolyRegression> reg =
            options.basis == RegressionOptions::Basis::Cells
                ? std::variant<CellRegression, PolyRegression>(
                      std::in_place_type<CellRegression>, bundle, k, options)
                : std::variant<CellRegression, PolyRegression>(
                      std::in_place_type<PolyRegression>, bundle, k, options);
        auto run_fit = [&](const std::vector<double>& tg, std::vector<double>& pr) {
            return std::visit([&](const auto& r) { return r.fit(tg, pr); }, reg);
        };

        for (int i = 0; i < bundle.dim; ++i) {
            for (int p = 0; p < m; ++p)
                targets[p] = yref(p, k + 1) * bundle.dwval(p, k, i) / dt;
            bundle.regression_fallbacks += run_fit(targets, predictions);
            for (int p = 0; p < m; ++p) zref(p, k, i) = predictions[p];
        }

        parallel_for(np, [&](std::size_t p) {
            const int pi = static_cast<int>(p);
            Vec zk(bundle.dim);
            for (int i = 0; i < bundle.dim; ++i) zk[i] = zref(pi, k, i);
            const double ynext = yref(pi, k + 1);
            const double fval = problem.generator(t, bundle.state(pi, k), ynext, zk,
                                                  bundle.control(pi, k));
            targets[p] = ynext + dt * fval;
            payoff[p] += dt * fval;
        });
        bundle.regression_fallbacks += run_fit(targets, predictions);
        for (int p = 0; p < m; ++p) yref(p, k) = predictions[p];
    }

    bundle.backward_done = true;
    CostEstimate est;
    for (int p = 0; p < m; ++p) est.mean += yref(p, 0);
    est.mean /= m;
    if (m > 1) {
        double payoff_mean = 0.0;
        for (double v : payoff) payoff_mean += v;
        payoff_mean /= m;
        double ss = 0.0;
        for (double v : payoff) ss += (v - payoff_mean) * (v - payoff_mean);
        est.stderr_ = std::sqrt(ss / (m - 1)) / std::sqrt(static_cast<double>(m));
    }
    return est;
}

CostEstimate estimate_cost(const ControlProblem& problem, const ControlLaw& control,
                           double s, const Vec& y, int paths, double dt,
                           std::uint64_t seed, const RegressionOptions& options) {
    PathBundle bundle = simulate_forward(problem, control, s, y, paths, dt, seed);
    return solve_bsde(problem, bundle, options);
}

double dpp_consistency(const ControlProblem& problem, const ValueField& field,
                       const PathBundle& bundle) {
    (void)problem;
    if (!bundle.backward_done)
        throw std::invalid_argument("dpp_consistency: backward pass not populated");
    double worst = 0.0;
    for (int k = 0; k <= bundle.steps; ++k) {
        double acc = 0.0;
        for (int p = 0; p < bundle.paths; ++p) {
            const double v = field.query(bundle.time(k), bundle.state(p, k)).value;
            acc += std::abs(bundle.yval(p, k) - v);
        }
        worst = std::max(worst, acc / bundle.paths);
    }
    return worst;
}

double increment_moment_zscore(const PathBundle& bundle) {
    const std::size_t count =
        static_cast<std::size_t>(bundle.paths) * bundle.steps;
    if (count == 0) return 0.0;
    const int d = bundle.dim;
    const double dt = bundle.dt;
    double worst = 0.0;

    for (int i = 0; i < d; ++i) {
        double sum = 0.0, sumsq = 0.0;
        for (int p = 0; p < bundle.paths; ++p)
            for (int k = 0; k < bundle.steps; ++k) {
                const double v = bundle.dwval(p, k, i);
                sum += v;
                sumsq += v * v;
            }
        const double mean = sum / count;
        const double var = sumsq / count;
        // mean ~ N(0, dt/count); var estimate ~ dt (1 +/- sqrt(2/count))
        worst = std::max(worst, std::abs(mean) / std::sqrt(dt / count));
        worst = std::max(worst, std::abs(var - dt) / (dt * std::sqrt(2.0 / count)));
        for (int l = i + 1; l < d; ++l) {
            double cross = 0.0;
            for (int p = 0; p < bundle.paths; ++p)
                for (int k = 0; k < bundle.steps; ++k)
                    cross += bundle.dwval(p, k, i) * bundle.dwval(p, k, l);
            worst = std::max(worst, std::abs(cross / count) / (dt / std::sqrt(count)));
        }
    }
    return worst;
}

}  // namespace fbsc
