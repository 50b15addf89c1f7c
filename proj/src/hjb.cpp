#include "fbsc/hjb.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

#include "fbsc/rng.hpp"

namespace fbsc {

double hamiltonian(const ControlProblem& problem, double t, const Vec& x, double psi,
                   const Vec& q, const Mat& theta, const Vec& u) {
    const double asym = (theta - theta.transpose()).norm();
    if (asym > 1e-12 * std::max(theta.norm(), 1.0))
        throw std::invalid_argument("hamiltonian: theta is not symmetric");
    const Vec b = problem.drift(t, x, u);
    const Mat sigma = problem.diffusion(t, x, u);
    const double diffusion_term = 0.5 * (sigma * sigma.transpose() * theta).trace();
    const Vec z = sigma.transpose() * q;
    return diffusion_term + q.dot(b) + problem.generator(t, x, psi, z, u);
}

HamiltonianMin hamiltonian_min(const ControlProblem& problem, double t, const Vec& x,
                               double psi, const Vec& q, const Mat& theta) {
    HamiltonianMin best;
    best.value = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < problem.control_set.size(); ++i) {
        const double h = hamiltonian(problem, t, x, psi, q, theta, problem.control_set[i]);
        if (h < best.value) {
            best.value = h;
            best.argmin_index = i;
        }
    }
    return best;
}

namespace {

/// Neighbor values of one slice along one axis, boundary-aware.
struct AxisStencil {
    double minus = 0.0, center = 0.0, plus = 0.0;
    bool at_lo = false, at_hi = false;
};

AxisStencil axis_stencil(const Grid& g, const double* w, std::size_t j, int axis) {
    AxisStencil s;
    const int idx = g.axis_index(j, axis);
    const int n = g.nodes_per_axis()[axis];
    const std::size_t str = g.stride(axis);
    s.center = w[j];
    if (idx == 0) {
        s.at_lo = true;
        s.minus = w[j];  // unused when at_lo (one-sided formulas below)
        s.plus = w[j + str];
    } else if (idx == n - 1) {
        s.at_hi = true;
        s.minus = w[j - str];
        s.plus = w[j];
    } else {
        s.minus = w[j - str];
        s.plus = w[j + str];
    }
    return s;
}

/// Second derivative estimate, one-sided at the boundary (uses the two
/// nearest interior nodes there).
double second_difference(const Grid& g, const double* w, std::size_t j, int axis) {
    const AxisStencil s = axis_stencil(g, w, j, axis);
    const double h = g.spacing()[axis];
    const std::size_t str = g.stride(axis);
    if (s.at_lo) return (w[j] - 2.0 * w[j + str] + w[j + 2 * str]) / (h * h);
    if (s.at_hi) return (w[j] - 2.0 * w[j - str] + w[j - 2 * str]) / (h * h);
    return (s.plus - 2.0 * s.center + s.minus) / (h * h);
}

double central_gradient(const Grid& g, const double* w, std::size_t j, int axis) {
    const AxisStencil s = axis_stencil(g, w, j, axis);
    const double h = g.spacing()[axis];
    if (s.at_lo) return (s.plus - s.center) / h;
    if (s.at_hi) return (s.center - s.minus) / h;
    return (s.plus - s.minus) / (2.0 * h);
}

double upwind_gradient(const Grid& g, const double* w, std::size_t j, int axis, double b) {
    const AxisStencil s = axis_stencil(g, w, j, axis);
    const double h = g.spacing()[axis];
    if (b >= 0.0) {
        if (s.at_hi) return (s.center - s.minus) / h;
        return (s.plus - s.center) / h;
    }
    if (s.at_lo) return (s.plus - s.center) / h;
    return (s.center - s.minus) / h;
}

/// Value at node j shifted by si/sl steps along two axes, shifts clamped to
/// the grid (degrades the cross stencil to one-sided near the boundary).
double shifted_value(const Grid& g, const double* w, std::size_t j, int ai, int si,
                     int al, int sl) {
    std::size_t flat = j;
    auto shift = [&](int axis, int s) {
        const int idx = g.axis_index(flat, axis);
        int tgt = std::min(std::max(idx + s, 0), g.nodes_per_axis()[axis] - 1);
        flat = flat + g.stride(axis) * static_cast<std::size_t>(tgt) -
               g.stride(axis) * static_cast<std::size_t>(idx);
    };
    shift(ai, si);
    shift(al, sl);
    return w[flat];
}

bool on_axis_boundary(const Grid& g, std::size_t j, int axis) {
    const int idx = g.axis_index(j, axis);
    return idx == 0 || idx == g.nodes_per_axis()[axis] - 1;
}

/// Sign-split cross stencil for a mixed second derivative. For a positive
/// coefficient the diagonal (++/--) corners carry positive weights, for a
/// negative coefficient the anti-diagonal (+-/-+) corners do; both keep the
/// explicit update monotone under diagonal dominance. Boundary nodes drop
/// the term: a one-sided cross stencil cannot stay monotone, and the trust
/// region excludes the boundary ring.
double mixed_difference(const Grid& g, const double* w, std::size_t j, int ai, int al,
                        double coeff_sign) {
    if (on_axis_boundary(g, j, ai) || on_axis_boundary(g, j, al)) return 0.0;
    const double hi = g.spacing()[ai], hl = g.spacing()[al];
    const double c = w[j];
    if (coeff_sign >= 0.0) {
        const double pp = shifted_value(g, w, j, ai, +1, al, +1);
        const double mm = shifted_value(g, w, j, ai, -1, al, -1);
        const double pi = shifted_value(g, w, j, ai, +1, al, 0);
        const double mi = shifted_value(g, w, j, ai, -1, al, 0);
        const double pl = shifted_value(g, w, j, ai, 0, al, +1);
        const double ml = shifted_value(g, w, j, ai, 0, al, -1);
        return (2.0 * c + pp + mm - pi - mi - pl - ml) / (2.0 * hi * hl);
    }
    const double pm = shifted_value(g, w, j, ai, +1, al, -1);
    const double mp = shifted_value(g, w, j, ai, -1, al, +1);
    const double pi = shifted_value(g, w, j, ai, +1, al, 0);
    const double mi = shifted_value(g, w, j, ai, -1, al, 0);
    const double pl = shifted_value(g, w, j, ai, 0, al, +1);
    const double ml = shifted_value(g, w, j, ai, 0, al, -1);
    return (pi + mi + pl + ml - 2.0 * c - pm - mp) / (2.0 * hi * hl);
}

/// Discretisation used inside the sweep. Every term keeps a nonnegative
/// weight on neighbour values so the explicit update is monotone under the
/// CFL bound:
///   - interior: central transport while |b| h <= a_ii (second order),
///     upwind by the drift sign otherwise; central second differences;
///     sign-split cross stencil for mixed terms;
///   - boundary ring: curvature and mixed terms drop (no one-sided second
///     difference is monotone) and only inward-pointing drift survives.
/// The ring is first-order wrong by construction; the trust region exists
/// to exclude it.
double discrete_hamiltonian(const ControlProblem& problem, const Grid& grid,
                            const double* w, double t, std::size_t j, const Vec& x,
                            const Vec& central_grad, const Vec& u) {
    const int d = grid.dim();
    const Vec b = problem.drift(t, x, u);
    const Mat sigma = problem.diffusion(t, x, u);
    const Mat a = sigma * sigma.transpose();

    double h = 0.0;
    for (int i = 0; i < d; ++i) {
        const int idx = grid.axis_index(j, i);
        const bool at_lo = idx == 0;
        const bool at_hi = idx == grid.nodes_per_axis()[i] - 1;
        if (!at_lo && !at_hi) {
            h += 0.5 * a(i, i) * second_difference(grid, w, j, i);
            const bool central_monotone =
                std::abs(b[i]) * grid.spacing()[i] <= a(i, i) + 1e-15;
            if (central_monotone)
                h += b[i] * central_gradient(grid, w, j, i);
            else
                h += b[i] * upwind_gradient(grid, w, j, i, b[i]);
            for (int l = i + 1; l < d; ++l) {
                const double ail = a(i, l);
                if (ail != 0.0) h += ail * mixed_difference(grid, w, j, i, l, ail);
            }
        } else if ((at_lo && b[i] > 0.0) || (at_hi && b[i] < 0.0)) {
            h += b[i] * upwind_gradient(grid, w, j, i, b[i]);
        }
    }
    const Vec z = sigma.transpose() * central_grad;
    h += problem.generator(t, x, w[j], z, u);
    return h;
}

struct CoefficientExtrema {
    Vec max_abs_drift;       // per axis
    Vec max_diag_diffusion;  // per axis, of sigma sigma^T
    bool diagonally_dominant = true;
};

CoefficientExtrema scan_coefficients(const ControlProblem& problem, const Grid& grid) {
    const int d = grid.dim();
    CoefficientExtrema ext;
    ext.max_abs_drift = Vec::Zero(d);
    ext.max_diag_diffusion = Vec::Zero(d);
    const int time_samples = 5;
    for (int ts = 0; ts <= time_samples; ++ts) {
        const double t = grid.horizon() * ts / time_samples;
        for (std::size_t j = 0; j < grid.node_count(); ++j) {
            const Vec x = grid.node(j);
            for (std::size_t c = 0; c < problem.control_set.size(); ++c) {
                const Vec& u = problem.control_set[c];
                const Vec b = problem.drift(t, x, u);
                const Mat sigma = problem.diffusion(t, x, u);
                const Mat a = sigma * sigma.transpose();
                for (int i = 0; i < d; ++i) {
                    ext.max_abs_drift[i] = std::max(ext.max_abs_drift[i], std::abs(b[i]));
                    ext.max_diag_diffusion[i] = std::max(ext.max_diag_diffusion[i], a(i, i));
                    double off = 0.0;
                    for (int l = 0; l < d; ++l)
                        if (l != i) off += std::abs(a(i, l)) / grid.spacing()[l];
                    if (a(i, i) / grid.spacing()[i] + 1e-12 < off)
                        ext.diagonally_dominant = false;
                }
            }
        }
    }
    return ext;
}

double probe_generator_y_lipschitz(const ControlProblem& problem, const Grid& grid) {
    if (problem.lipschitz_bound) return *problem.lipschitz_bound;
    Rng rng(substream_seed(0x1f5eed, 1));
    double worst = 0.0;
    for (int n = 0; n < 256; ++n) {
        const double t = rng.uniform(0.0, grid.horizon());
        Vec x(grid.dim());
        for (int i = 0; i < grid.dim(); ++i)
            x[i] = rng.uniform(grid.lo()[i], grid.hi()[i]);
        Vec z(grid.dim());
        for (int i = 0; i < grid.dim(); ++i) z[i] = rng.uniform(-3.0, 3.0);
        const Vec& u = problem.control_set[static_cast<std::size_t>(
            rng.uniform() * static_cast<double>(problem.control_set.size()))];
        const double y1 = rng.uniform(-5.0, 5.0), y2 = rng.uniform(-5.0, 5.0);
        if (std::abs(y1 - y2) < 1e-9) continue;
        const double ratio = std::abs(problem.generator(t, x, y1, z, u) -
                                      problem.generator(t, x, y2, z, u)) /
                             std::abs(y1 - y2);
        worst = std::max(worst, ratio);
    }
    return worst;
}

}  // namespace

std::string CflReport::summary() const {
    std::ostringstream os;
    os << "cfl: dt=" << dt << " limit=" << dt_limit << " bound=" << bound
       << " (diffusion " << diffusion_term << " + drift " << drift_term << " + L_f "
       << generator_y_lipschitz << ") " << (ok ? "ok" : "VIOLATED");
    if (!diagonally_dominant)
        os << "; warning: sigma sigma^T not diagonally dominant, mixed-term "
              "monotonicity not guaranteed";
    return os.str();
}

CflReport check_cfl(const ControlProblem& problem, const Grid& grid) {
    problem.validate();
    const CoefficientExtrema ext = scan_coefficients(problem, grid);
    CflReport rep;
    for (int i = 0; i < grid.dim(); ++i) {
        const double h = grid.spacing()[i];
        rep.diffusion_term += ext.max_diag_diffusion[i] / (h * h);
        rep.drift_term += ext.max_abs_drift[i] / h;
    }
    rep.generator_y_lipschitz = probe_generator_y_lipschitz(problem, grid);
    rep.bound = rep.diffusion_term + rep.drift_term + rep.generator_y_lipschitz;
    rep.dt = grid.dt();
    rep.dt_limit = rep.bound > 0.0 ? 1.0 / rep.bound : std::numeric_limits<double>::infinity();
    rep.ok = rep.dt * rep.bound <= 1.0 + 1e-12;
    rep.diagonally_dominant = ext.diagonally_dominant;
    return rep;
}

int cfl_time_steps(const ControlProblem& problem, const Vec& lo, const Vec& hi,
                   const std::vector<int>& nodes_per_axis) {
    const Grid probe(lo, hi, nodes_per_axis, 1, problem.horizon);
    const CflReport rep = check_cfl(problem, probe);
    if (rep.bound <= 0.0) return 1;
    return std::max(1, static_cast<int>(std::ceil(problem.horizon * rep.bound * (1.0 + 1e-12))));
}

ValueField solve_hjb(const ControlProblem& problem, const Grid& grid) {
    const CflReport cfl = check_cfl(problem, grid);
    if (!cfl.ok)
        throw std::runtime_error("solve_hjb: CFL violated, " + cfl.summary());

    const std::size_t nodes = grid.node_count();
    const int nt = grid.time_steps();
    std::vector<double> values(static_cast<std::size_t>(nt + 1) * nodes);

    double* terminal = values.data() + static_cast<std::size_t>(nt) * nodes;
    for (std::size_t j = 0; j < nodes; ++j) terminal[j] = problem.terminal(grid.node(j));

    const double dt = grid.dt();
    std::atomic<bool> failed{false};
    std::atomic<long long> fail_loc{-1};

    for (int k = nt - 1; k >= 0; --k) {
        const double* w = values.data() + static_cast<std::size_t>(k + 1) * nodes;
        double* v = values.data() + static_cast<std::size_t>(k) * nodes;
        const double t = grid.time(k + 1);
        parallel_for(nodes, [&](std::size_t j) {
            if (failed.load(std::memory_order_relaxed)) return;
            const double h0 = discrete_hamiltonian_min(problem, grid, w, t, j);
            const double next = w[j] + dt * h0;
            if (!std::isfinite(next)) {
                failed.store(true, std::memory_order_relaxed);
                fail_loc.store(static_cast<long long>(k) * static_cast<long long>(nodes) +
                                   static_cast<long long>(j),
                               std::memory_order_relaxed);
                return;
            }
            v[j] = next;
        });
        if (failed.load()) {
            const long long loc = fail_loc.load();
            std::ostringstream os;
            os << "solve_hjb: non-finite value at time index " << loc / static_cast<long long>(nodes)
               << ", node " << loc % static_cast<long long>(nodes);
            throw std::runtime_error(os.str());
        }
    }
    return ValueField(grid, std::move(values));
}

double discrete_hamiltonian_min(const ControlProblem& problem, const Grid& grid,
                                const double* w, double t, std::size_t j) {
    const Vec x = grid.node(j);
    Vec cgrad(grid.dim());
    for (int i = 0; i < grid.dim(); ++i) cgrad[i] = central_gradient(grid, w, j, i);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < problem.control_set.size(); ++c) {
        const double h =
            discrete_hamiltonian(problem, grid, w, t, j, x, cgrad, problem.control_set[c]);
        if (h < best) best = h;
    }
    return best;
}

double discrete_hamiltonian_control(const ControlProblem& problem, const Grid& grid,
                                    const double* w, double t, std::size_t j,
                                    const Vec& u) {
    const Vec x = grid.node(j);
    Vec cgrad(grid.dim());
    for (int i = 0; i < grid.dim(); ++i) cgrad[i] = central_gradient(grid, w, j, i);
    return discrete_hamiltonian(problem, grid, w, t, j, x, cgrad, u);
}

FeedbackPolicy synthesize_policy(const ControlProblem& problem, const ValueField& field) {
    problem.validate();
    const Grid& grid = field.grid();
    const std::size_t nodes = grid.node_count();
    std::vector<std::uint32_t> indices(static_cast<std::size_t>(grid.time_steps() + 1) * nodes);

    for (int k = 0; k <= grid.time_steps(); ++k) {
        const double t = grid.time(k);
        std::uint32_t* out = indices.data() + static_cast<std::size_t>(k) * nodes;
        parallel_for(nodes, [&](std::size_t j) {
            const NodeJet jet = node_jet(field, k, j);
            const HamiltonianMin hm =
                hamiltonian_min(problem, t, grid.node(j), field.at(k, j), jet.q, jet.theta);
            out[j] = static_cast<std::uint32_t>(hm.argmin_index);
        });
    }
    return FeedbackPolicy(grid, problem.control_set, std::move(indices));
}

NodeJet node_jet(const ValueField& field, int k, std::size_t j) {
    const Grid& g = field.grid();
    const double* w = field.values().data() + static_cast<std::size_t>(k) * g.node_count();
    NodeJet jet;
    const double dt = g.dt();
    if (k < g.time_steps())
        jet.p = (field.at(k + 1, j) - field.at(k, j)) / dt;
    else
        jet.p = (field.at(k, j) - field.at(k - 1, j)) / dt;
    jet.q = Vec(g.dim());
    jet.theta = Mat::Zero(g.dim(), g.dim());
    for (int i = 0; i < g.dim(); ++i) {
        jet.q[i] = central_gradient(g, w, j, i);
        jet.theta(i, i) = second_difference(g, w, j, i);
        for (int l = i + 1; l < g.dim(); ++l) {
            if (on_axis_boundary(g, j, i) || on_axis_boundary(g, j, l)) continue;
            const double pp = shifted_value(g, w, j, i, +1, l, +1);
            const double mm = shifted_value(g, w, j, i, -1, l, -1);
            const double pm = shifted_value(g, w, j, i, +1, l, -1);
            const double mp = shifted_value(g, w, j, i, -1, l, +1);
            const double mixed = (pp + mm - pm - mp) / (4.0 * g.spacing()[i] * g.spacing()[l]);
            jet.theta(i, l) = mixed;
            jet.theta(l, i) = mixed;
        }
    }
    return jet;
}

}  // namespace fbsc
