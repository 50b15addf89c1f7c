#pragma once

#include "fbsc/fbsde.hpp"
#include "fbsc/grid.hpp"
#include "fbsc/hjb.hpp"
#include "fbsc/subdiff.hpp"

namespace fbsc {

struct VerifyOptions {
    double gap_tolerance = 0.05;       // Hamiltonian-gap time integral
    double value_tolerance = 0.05;     // |J - v(s,y)| beyond 3 stderr
    double residual_tolerance = 0.05;  // pointwise checks on grid fields
    double tie_tolerance = 1e-9;       // feedback minimiser tie slack
    double escape_fraction = 0.05;     // max share of paths leaving the trust box
    /// Kink detector: a node is flagged when some undivided axis second
    /// difference exceeds kink_factor * h^{3/2}; flagged nodes are widened by
    /// kink_exclusion_cells and skipped by trajectory jet checks.
    double kink_factor = 1.0;
    int kink_exclusion_cells = 2;
};

enum class Verdict { CertifiedOptimal, Suboptimal, Inconclusive };

const char* to_string(Verdict v);

struct VerificationReport {
    double value_at_start = 0.0;     // v(s, y) interpolated from the field
    CostEstimate cost;               // J(s, y; control) with standard error
    double optimality_gap = 0.0;     // cost.mean - value_at_start
    double gap_integral_mean = 0.0;  // E int [H(., u_t) - min_u H] dt
    double gap_integral_stderr = 0.0;
    int pointwise_violations = 0;  // jet inequality p + min H < -tolerance
    double worst_pointwise = 0.0;
    double escaped_fraction = 0.0;  // paths that left the trust region
    double skipped_fraction = 0.0;  // path-steps skipped near detected kinks
    double field_residual = 0.0;    // pointwise HJB residual of the field
    Verdict verdict = Verdict::Inconclusive;
    double gap_tolerance_used = 0.0;
    double value_tolerance_used = 0.0;
    std::string detail;
};

struct HjbResidual {
    /// (v_{k+1} - v_k)/dt + min_u Hhat(t_k, x_j, v_k, u), time-major over
    /// k = 0..time_steps-1.
    std::vector<double> values;
    double max_abs_trust = 0.0;
};

/// Discrete HJB residual of a grid field: one-sided time difference plus the
/// solver's own spatial discretisation. For solver output this measures
/// truncation drift between slices; for injected analytic fields it measures
/// how well they satisfy the equation.
HjbResidual pointwise_hjb_residual(const ControlProblem& problem, const ValueField& field);

struct JetInequalityReport {
    std::vector<double> values;  // p + min_u H per (point, jet), flattened
    int violations = 0;          // entries below -tolerance
    double worst_value = 0.0;    // minimum entry
    double tolerance = 0.0;
};

/// Jet form of the subsolution inequality: for each accepted superjet
/// (p, q, Theta) at (t, x), evaluates p + min_u H(t, x, v(t,x), q, Theta, u)
/// and counts values below -tolerance.
JetInequalityReport superjet_inequality_check(
    const ControlProblem& problem, const FieldView& v,
    const std::vector<std::pair<double, Vec>>& points,
    const std::vector<std::vector<JetCandidate>>& jets_per_point, double tolerance);

struct McRun {
    int paths = 10000;
    double dt = 0.01;
    std::uint64_t seed = 1;
    RegressionOptions regression;
};

/// Certifies or rejects a candidate pair (control, trajectory law) against a
/// trusted value field. Simulates the pair, estimates the cost J = Y(s),
/// accumulates the pathwise Hamiltonian-gap integral using local jets of the
/// field, and combines the two into a verdict:
///   CERTIFIED_OPTIMAL  gap integral <= gap_tolerance and
///                      |J - v(s,y)| <= 3 stderr + value_tolerance,
///   SUBOPTIMAL         gap integral > 3 * gap_tolerance,
///   INCONCLUSIVE       otherwise, or when too many paths leave the trust
///                      region, or the field fails its own residual check.
/// Cost and gap statistics share one path ensemble (common random numbers),
/// so their difference is directly comparable.
VerificationReport verify_pair(const ControlProblem& problem, const ValueField& field,
                               const ControlLaw& control, double s, const Vec& y,
                               const McRun& mc, const VerifyOptions& options = {});

struct FeedbackReport {
    int points_checked = 0;
    int points_passed = 0;
    double pass_fraction = 0.0;
    double worst_residual = 0.0;   // max |p + Hhat(., policy)| among checked
    double worst_min_excess = 0.0;  // max H(policy) - min_u H among checked
};

/// Samples trust-region nodes and checks that the policy both attains the
/// Hamiltonian minimum (within tie_tolerance) and zeroes the scheme residual
/// |dv/dt + Hhat(., policy)| within residual_tolerance.
FeedbackReport verify_feedback(const ControlProblem& problem, const ValueField& field,
                               const FeedbackPolicy& policy, int sample_points,
                               std::uint64_t seed, const VerifyOptions& options = {});

}  // namespace fbsc
