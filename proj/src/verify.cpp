#include "fbsc/verify.hpp"

#include <cmath>
#include <sstream>

#include "fbsc/rng.hpp"

namespace fbsc {

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::CertifiedOptimal: return "CERTIFIED_OPTIMAL";
        case Verdict::Suboptimal: return "SUBOPTIMAL";
        case Verdict::Inconclusive: return "INCONCLUSIVE";
    }
    return "INCONCLUSIVE";
}

HjbResidual pointwise_hjb_residual(const ControlProblem& problem, const ValueField& field) {
    problem.validate();
    const Grid& g = field.grid();
    const std::size_t nodes = g.node_count();
    const int nt = g.time_steps();
    HjbResidual out;
    out.values.resize(static_cast<std::size_t>(nt) * nodes);

    std::vector<double> trust_max(nt, 0.0);
    for (int k = 0; k < nt; ++k) {
        const double* w = field.values().data() + static_cast<std::size_t>(k) * nodes;
        double* res = out.values.data() + static_cast<std::size_t>(k) * nodes;
        const double t = g.time(k);
        double local_max = 0.0;
        parallel_for(nodes, [&](std::size_t j) {
            const double dvdt = (field.at(k + 1, j) - field.at(k, j)) / g.dt();
            res[j] = dvdt + discrete_hamiltonian_min(problem, g, w, t, j);
        });
        for (std::size_t j = 0; j < nodes; ++j)
            if (g.in_trust_region(g.node(j)))
                local_max = std::max(local_max, std::abs(res[j]));
        trust_max[k] = local_max;
    }
    for (double v : trust_max) out.max_abs_trust = std::max(out.max_abs_trust, v);
    return out;
}

JetInequalityReport superjet_inequality_check(
    const ControlProblem& problem, const FieldView& v,
    const std::vector<std::pair<double, Vec>>& points,
    const std::vector<std::vector<JetCandidate>>& jets_per_point, double tolerance) {
    problem.validate();
    if (points.size() != jets_per_point.size())
        throw std::invalid_argument("superjet_inequality_check: points/jets size mismatch");

    JetInequalityReport rep;
    rep.tolerance = tolerance;
    rep.worst_value = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& [t, x] = points[i];
        const double psi = v.eval(t, x);
        for (const JetCandidate& jet : jets_per_point[i]) {
            jet.validate();
            const HamiltonianMin hm = hamiltonian_min(problem, t, x, psi, jet.q, jet.theta);
            const double value = jet.p + hm.value;
            rep.values.push_back(value);
            rep.worst_value = std::min(rep.worst_value, value);
            if (value < -tolerance) ++rep.violations;
        }
    }
    if (rep.values.empty()) rep.worst_value = 0.0;
    return rep;
}

namespace {

/// Nodes whose undivided second difference spikes above kink_factor * h^{3/2}
/// along some axis, widened by `widen` cells. One mask per time slice.
std::vector<std::vector<char>> detect_kinks(const ValueField& field, double kink_factor,
                                            int widen) {
    const Grid& g = field.grid();
    const std::size_t nodes = g.node_count();
    std::vector<std::vector<char>> mask(g.time_steps() + 1,
                                        std::vector<char>(nodes, 0));
    for (int k = 0; k <= g.time_steps(); ++k) {
        std::vector<char> spike(nodes, 0);
        for (std::size_t j = 0; j < nodes; ++j) {
            for (int i = 0; i < g.dim(); ++i) {
                const int idx = g.axis_index(j, i);
                if (idx == 0 || idx == g.nodes_per_axis()[i] - 1) continue;
                const std::size_t str = g.stride(i);
                const double undivided = std::abs(
                    field.at(k, j + str) - 2.0 * field.at(k, j) + field.at(k, j - str));
                if (undivided > kink_factor * std::pow(g.spacing()[i], 1.5)) {
                    spike[j] = 1;
                    break;
                }
            }
        }
        // widen along each axis
        std::vector<char>& out = mask[k];
        for (std::size_t j = 0; j < nodes; ++j) {
            if (!spike[j]) continue;
            out[j] = 1;
            for (int i = 0; i < g.dim(); ++i) {
                const int idx = g.axis_index(j, i);
                for (int s = -widen; s <= widen; ++s) {
                    const int tgt = idx + s;
                    if (tgt < 0 || tgt >= g.nodes_per_axis()[i]) continue;
                    out[j + g.stride(i) * static_cast<std::size_t>(tgt) -
                        g.stride(i) * static_cast<std::size_t>(idx)] = 1;
                }
            }
        }
    }
    return mask;
}

}  // namespace

VerificationReport verify_pair(const ControlProblem& problem, const ValueField& field,
                               const ControlLaw& control, double s, const Vec& y,
                               const McRun& mc, const VerifyOptions& options) {
    problem.validate();
    const Grid& g = field.grid();
    VerificationReport rep;
    rep.gap_tolerance_used = options.gap_tolerance;
    rep.value_tolerance_used = options.value_tolerance;

    const HjbResidual residual = pointwise_hjb_residual(problem, field);
    rep.field_residual = residual.max_abs_trust;
    const bool field_trusted = residual.max_abs_trust <= options.residual_tolerance;

    PathBundle bundle = simulate_forward(problem, control, s, y, mc.paths, mc.dt, mc.seed);
    rep.cost = solve_bsde(problem, bundle, mc.regression);
    rep.value_at_start = field.query(s, y).value;
    rep.optimality_gap = rep.cost.mean - rep.value_at_start;

    const auto kink_mask =
        detect_kinks(field, options.kink_factor, options.kink_exclusion_cells);

    const int m = bundle.paths;
    std::vector<double> gap(m, 0.0);
    std::vector<char> escaped(m, 0);
    std::vector<int> skipped(m, 0);
    std::vector<int> violations(m, 0);
    std::vector<double> worst_pointwise(m, std::numeric_limits<double>::infinity());

    parallel_for(static_cast<std::size_t>(m), [&](std::size_t pi) {
        const int p = static_cast<int>(pi);
        for (int k = 0; k < bundle.steps; ++k) {
            const double t = bundle.time(k);
            const Vec x = bundle.state(p, k);
            if (!g.in_trust_region(x)) {
                escaped[p] = 1;
                continue;
            }
            int kg = static_cast<int>(std::lround(t / g.dt()));
            kg = std::min(std::max(kg, 0), g.time_steps());
            const std::size_t j = g.nearest_node(x);
            if (kink_mask[kg][j]) {
                ++skipped[p];
                continue;
            }
            const NodeJet jet = node_jet(field, kg, j);
            const double psi = field.at(kg, j);
            const HamiltonianMin hm = hamiltonian_min(problem, t, x, psi, jet.q, jet.theta);
            const double h_applied =
                hamiltonian(problem, t, x, psi, jet.q, jet.theta, bundle.control(p, k));
            gap[p] += (h_applied - hm.value) * bundle.dt;

            const double pointwise = jet.p + hm.value;
            worst_pointwise[p] = std::min(worst_pointwise[p], pointwise);
            if (pointwise < -options.residual_tolerance) ++violations[p];
        }
    });

    int escape_count = 0;
    long long skipped_steps = 0;
    double gap_sum = 0.0, gap_sumsq = 0.0;
    int used = 0;
    rep.worst_pointwise = std::numeric_limits<double>::infinity();
    for (int p = 0; p < m; ++p) {
        escape_count += escaped[p];
        skipped_steps += skipped[p];
        rep.pointwise_violations += violations[p];
        rep.worst_pointwise = std::min(rep.worst_pointwise, worst_pointwise[p]);
        if (!escaped[p]) {
            gap_sum += gap[p];
            gap_sumsq += gap[p] * gap[p];
            ++used;
        }
    }
    if (!std::isfinite(rep.worst_pointwise)) rep.worst_pointwise = 0.0;
    rep.escaped_fraction = static_cast<double>(escape_count) / m;
    rep.skipped_fraction =
        static_cast<double>(skipped_steps) / (static_cast<double>(m) * bundle.steps);
    if (used > 0) {
        rep.gap_integral_mean = gap_sum / used;
        if (used > 1) {
            const double var =
                (gap_sumsq - gap_sum * gap_sum / used) / (used - 1);
            rep.gap_integral_stderr = std::sqrt(std::max(var, 0.0) / used);
        }
    }

    std::ostringstream detail;
    if (!field_trusted) {
        rep.verdict = Verdict::Inconclusive;
        detail << "field residual " << rep.field_residual << " exceeds tolerance "
               << options.residual_tolerance;
    } else if (rep.escaped_fraction > options.escape_fraction) {
        rep.verdict = Verdict::Inconclusive;
        detail << "escaped fraction " << rep.escaped_fraction << " exceeds "
               << options.escape_fraction;
    } else {
        const double value_tol = 3.0 * rep.cost.stderr_ + options.value_tolerance;
        const bool gap_ok = rep.gap_integral_mean <= options.gap_tolerance;
        const bool value_ok = std::abs(rep.optimality_gap) <= value_tol;
        if (gap_ok && value_ok) {
            rep.verdict = Verdict::CertifiedOptimal;
            detail << "gap integral " << rep.gap_integral_mean << " <= "
                   << options.gap_tolerance << ", |J - v| " << std::abs(rep.optimality_gap)
                   << " <= " << value_tol;
        } else if (rep.gap_integral_mean > 3.0 * options.gap_tolerance) {
            rep.verdict = Verdict::Suboptimal;
            detail << "gap integral " << rep.gap_integral_mean << " > "
                   << 3.0 * options.gap_tolerance;
        } else {
            rep.verdict = Verdict::Inconclusive;
            detail << "gap integral " << rep.gap_integral_mean << " and optimality gap "
                   << rep.optimality_gap << " within the undecided band";
        }
    }
    rep.detail = detail.str();
    return rep;
}

FeedbackReport verify_feedback(const ControlProblem& problem, const ValueField& field,
                               const FeedbackPolicy& policy, int sample_points,
                               std::uint64_t seed, const VerifyOptions& options) {
    problem.validate();
    const Grid& g = field.grid();
    if (policy.grid().node_count() != g.node_count() ||
        policy.grid().time_steps() != g.time_steps())
        throw std::invalid_argument("verify_feedback: policy grid does not match field grid");

    std::vector<std::size_t> trusted;
    for (std::size_t j = 0; j < g.node_count(); ++j)
        if (g.in_trust_region(g.node(j))) trusted.push_back(j);
    if (trusted.empty())
        throw std::invalid_argument("verify_feedback: empty trust region");

    Rng rng(substream_seed(seed, 0xfeedbacc));
    FeedbackReport rep;
    const std::size_t nodes = g.node_count();
    for (int n = 0; n < sample_points; ++n) {
        const int k = static_cast<int>(rng.uniform() * g.time_steps());
        const std::size_t j = trusted[static_cast<std::size_t>(
            rng.uniform() * static_cast<double>(trusted.size()))];
        const double t_next = g.time(k + 1);
        const double* w = field.values().data() + static_cast<std::size_t>(k + 1) * nodes;

        const Vec& u_pol = policy.control_at(k, j);
        const double dvdt = (field.at(k + 1, j) - field.at(k, j)) / g.dt();
        const double residual =
            dvdt + discrete_hamiltonian_control(problem, g, w, t_next, j, u_pol);

        const NodeJet jet = node_jet(field, k, j);
        const HamiltonianMin hm =
            hamiltonian_min(problem, g.time(k), g.node(j), field.at(k, j), jet.q, jet.theta);
        const double h_pol = hamiltonian(problem, g.time(k), g.node(j), field.at(k, j),
                                         jet.q, jet.theta, u_pol);
        const double min_excess = h_pol - hm.value;

        ++rep.points_checked;
        rep.worst_residual = std::max(rep.worst_residual, std::abs(residual));
        rep.worst_min_excess = std::max(rep.worst_min_excess, min_excess);
        if (std::abs(residual) <= options.residual_tolerance &&
            min_excess <= options.tie_tolerance)
            ++rep.points_passed;
    }
    rep.pass_fraction =
        rep.points_checked > 0 ? static_cast<double>(rep.points_passed) / rep.points_checked
                               : 0.0;
    return rep;
}

}  // namespace fbsc
