#pragma once

#include "fbsc/grid.hpp"
#include "fbsc/model.hpp"

namespace fbsc {

/// Candidate element (p, q, Theta) of a second-order one-sided jet:
/// p bounds the right time slope, q the spatial gradient, Theta the
/// spatial curvature.
struct JetCandidate {
    double p = 0.0;
    Vec q;
    Mat theta;

    /// Throws when theta is not symmetric within 1e-12 relative tolerance.
    void validate() const;
};

/// Finite surrogate for the one-sided limit (t -> t0+, x -> x0): a strictly
/// decreasing ladder of radii, a sample budget per radius, and a per-radius
/// slack slack_coeff * r^slack_power absorbing the Taylor residue of smooth
/// fields. Time offsets scale parabolically (|t - t0| <= r^2).
struct NeighborhoodSchedule {
    std::vector<double> radii;
    int samples_per_radius = 200;
    double slack_coeff = 1e-2;
    double slack_power = 0.5;

    double slack(double r) const;
    void validate() const;

    /// Four radii, geometric with ratio 1/4, largest = 8 * max_spacing.
    static NeighborhoodSchedule defaults(double max_spacing);
};

/// Read-only scalar field over [0, horizon] x [lo, hi], either analytic or
/// backed by an interpolated grid field. min_radius is the resolution floor:
/// jet tests skip schedule radii below it (2 grid spacings for grid fields,
/// 0 for analytic ones).
struct FieldView {
    ScalarTXFn eval;
    Vec lo, hi;
    double horizon = 0.0;
    double min_radius = 0.0;
};

FieldView make_view(const ValueField& field);
FieldView make_view(ScalarTXFn fn, Vec lo, Vec hi, double horizon);

struct JetTestResult {
    bool accepted = false;
    double worst_ratio = 0.0;  // max defect ratio (superjet) / min (subjet)
    double worst_t = 0.0;
    Vec worst_x;
    int radii_used = 0;
};

/// Superjet membership: accepts when, at every usable radius r, the maximum
/// over sampled (t, x) with t >= t0, |t - t0| <= r^2, |x - x0| <= r of
///   [v(t,x) - v(t0,x0) - p (t-t0) - <q, x-x0> - (x-x0)' Theta (x-x0) / 2]
///     / (|t - t0| + |x - x0|^2)
/// stays <= slack(r). Samples are quasi-random plus axis probes; points
/// leaving the domain are skipped. Throws when (t0, x0) is outside the
/// domain, t0 >= horizon, or every radius sits below the resolution floor.
JetTestResult test_superjet(const FieldView& view, double t0, const Vec& x0,
                            const JetCandidate& jet, const NeighborhoodSchedule& schedule);

/// Mirror of test_superjet: accepts when every usable radius's minimum ratio
/// stays >= -slack(r).
JetTestResult test_subjet(const FieldView& view, double t0, const Vec& x0,
                          const JetCandidate& jet, const NeighborhoodSchedule& schedule);

/// Smallest C0 >= 0 such that v(t_k, .) - C0 |.|^2 has nonpositive
/// axis-aligned second differences (plus midpoint-concavity on random line
/// segments for d > 1).
double semiconcavity_constant(const ValueField& field, int k);

struct GrowthReport {
    double constant = 0.0;         // estimate at the field's native dt
    double coarse_constant = 0.0;  // estimate at 2 dt
    int exponent = 0;
    bool pass = false;  // both finite and within a factor 2 of each other
};

/// Estimates the smallest C with v(t+dt, x) - v(t, x) <= C (1 + |x|^m) dt
/// over all nodes and consecutive slices. m = 0 uses constant weight 1.
/// Passes when the estimate is finite and stable under doubling the time
/// stride.
GrowthReport growth_check(const ValueField& field, int m);

struct RegularityReport {
    double lipschitz_x = 0.0;  // max |dv| / |dx|, fixed t, trust region
    double holder_t = 0.0;     // max |dv| / |dt|^(1/2), fixed x, trust region
};

/// Finite-difference regularity constants over the trust region, maximised
/// over dyadic strides so the estimates are stable under mesh refinement.
RegularityReport regularity_check(const ValueField& field);

}  // namespace fbsc
