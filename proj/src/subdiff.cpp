#include "fbsc/subdiff.hpp"

#include <cmath>

#include "fbsc/rng.hpp"

namespace fbsc {

void JetCandidate::validate() const {
    if (theta.rows() != theta.cols() || theta.rows() != q.size())
        throw std::invalid_argument("JetCandidate: dimension mismatch");
    const double asym = (theta - theta.transpose()).norm();
    if (asym > 1e-12 * std::max(theta.norm(), 1.0))
        throw std::invalid_argument("JetCandidate: theta is not symmetric");
}

double NeighborhoodSchedule::slack(double r) const {
    return slack_coeff * std::pow(r, slack_power);
}

void NeighborhoodSchedule::validate() const {
    if (radii.empty()) throw std::invalid_argument("NeighborhoodSchedule: no radii");
    for (std::size_t i = 0; i < radii.size(); ++i) {
        if (!(radii[i] > 0.0))
            throw std::invalid_argument("NeighborhoodSchedule: radii must be positive");
        if (i > 0 && !(radii[i] < radii[i - 1]))
            throw std::invalid_argument("NeighborhoodSchedule: radii must decrease");
    }
    if (samples_per_radius < 1)
        throw std::invalid_argument("NeighborhoodSchedule: need >= 1 sample per radius");
}

NeighborhoodSchedule NeighborhoodSchedule::defaults(double max_spacing) {
    NeighborhoodSchedule s;
    double r = 8.0 * max_spacing;
    for (int i = 0; i < 4; ++i) {
        s.radii.push_back(r);
        r *= 0.25;
    }
    return s;
}

FieldView make_view(const ValueField& field) {
    FieldView v;
    v.eval = [field](double t, const Vec& x) { return field.query(t, x).value; };
    v.lo = field.grid().lo();
    v.hi = field.grid().hi();
    v.horizon = field.grid().horizon();
    v.min_radius = 2.0 * field.grid().max_spacing();
    return v;
}

FieldView make_view(ScalarTXFn fn, Vec lo, Vec hi, double horizon) {
    FieldView v;
    v.eval = std::move(fn);
    v.lo = std::move(lo);
    v.hi = std::move(hi);
    v.horizon = horizon;
    return v;
}

namespace {

double halton(std::size_t index, int base) {
    double f = 1.0, r = 0.0;
    std::size_t i = index + 1;
    while (i > 0) {
        f /= base;
        r += f * static_cast<double>(i % base);
        i /= base;
    }
    return r;
}

constexpr int kPrimes[] = {2, 3, 5, 7, 11};

bool inside_box(const FieldView& view, const Vec& x) {
    for (int i = 0; i < x.size(); ++i)
        if (x[i] < view.lo[i] || x[i] > view.hi[i]) return false;
    return true;
}

/// Defect of the second-order expansion at offset (dt, dx), divided by the
/// one-sided parabolic distance.
double defect_ratio(const FieldView& view, double v0, double t0, const Vec& x0,
                    const JetCandidate& jet, double dt, const Vec& dx) {
    const double denom = std::abs(dt) + dx.squaredNorm();
    if (denom < 1e-300) return 0.0;
    const double v = view.eval(t0 + dt, x0 + dx);
    const double defect =
        v - v0 - jet.p * dt - jet.q.dot(dx) - 0.5 * dx.dot(jet.theta * dx);
    return defect / denom;
}

enum class Side { Super, Sub };

JetTestResult run_jet_test(const FieldView& view, double t0, const Vec& x0,
                           const JetCandidate& jet, const NeighborhoodSchedule& schedule,
                           Side side) {
    jet.validate();
    schedule.validate();
    const int d = static_cast<int>(x0.size());
    if (jet.q.size() != d) throw std::invalid_argument("jet test: jet dimension mismatch");
    if (!inside_box(view, x0))
        throw std::invalid_argument("jet test: point outside the field domain");
    if (!(t0 >= 0.0 && t0 < view.horizon))
        throw std::invalid_argument("jet test: need 0 <= t0 < horizon (right-sided in time)");

    JetTestResult result;
    result.accepted = true;
    result.worst_ratio = side == Side::Super ? -std::numeric_limits<double>::infinity()
                                             : std::numeric_limits<double>::infinity();
    result.worst_x = x0;
    result.worst_t = t0;
    const double v0 = view.eval(t0, x0);

    for (double r : schedule.radii) {
        if (view.min_radius > 0.0 && r < view.min_radius) continue;
        ++result.radii_used;
        const double t_range = std::min(r * r, view.horizon - t0);
        double radius_extreme = side == Side::Super ? -std::numeric_limits<double>::infinity()
                                                    : std::numeric_limits<double>::infinity();
        double ext_t = t0;
        Vec ext_x = x0;

        auto consider = [&](double dt, const Vec& dx) {
            if (dt < 0.0 || dt > t_range) return;
            if (dt == 0.0 && dx.squaredNorm() == 0.0) return;  // not a neighbour
            if (!inside_box(view, x0 + dx)) return;
            const double ratio = defect_ratio(view, v0, t0, x0, jet, dt, dx);
            const bool better = side == Side::Super ? ratio > radius_extreme
                                                    : ratio < radius_extreme;
            if (better) {
                radius_extreme = ratio;
                ext_t = t0 + dt;
                ext_x = x0 + dx;
            }
        };

        // axis probes: the pure spatial and pure temporal directions
        for (int i = 0; i < d; ++i)
            for (double sgn : {-1.0, 1.0}) {
                Vec dx = Vec::Zero(d);
                dx[i] = sgn * r;
                consider(0.0, dx);
                consider(t_range, dx);
                dx[i] = sgn * 0.5 * r;
                consider(0.0, dx);
            }
        consider(t_range, Vec::Zero(d));

        for (int n = 0; n < schedule.samples_per_radius; ++n) {
            const double dt = t_range * halton(n, kPrimes[0]);
            Vec dx(d);
            for (int i = 0; i < d; ++i) dx[i] = 2.0 * halton(n, kPrimes[1 + i]) - 1.0;
            const double norm = dx.norm();
            if (norm > 1.0) dx /= norm;
            dx *= r;
            consider(dt, dx);
            consider(0.0, dx);
        }

        const bool super_ok = radius_extreme <= schedule.slack(r);
        const bool sub_ok = radius_extreme >= -schedule.slack(r);
        const bool ok = side == Side::Super ? super_ok : sub_ok;
        const bool track = side == Side::Super ? radius_extreme > result.worst_ratio
                                               : radius_extreme < result.worst_ratio;
        if (track) {
            result.worst_ratio = radius_extreme;
            result.worst_t = ext_t;
            result.worst_x = ext_x;
        }
        if (!ok) result.accepted = false;
    }

    if (result.radii_used == 0)
        throw std::invalid_argument(
            "jet test: every schedule radius is below the field's resolution floor");
    return result;
}

}  // namespace

JetTestResult test_superjet(const FieldView& view, double t0, const Vec& x0,
                            const JetCandidate& jet,
                            const NeighborhoodSchedule& schedule) {
    return run_jet_test(view, t0, x0, jet, schedule, Side::Super);
}

JetTestResult test_subjet(const FieldView& view, double t0, const Vec& x0,
                          const JetCandidate& jet, const NeighborhoodSchedule& schedule) {
    return run_jet_test(view, t0, x0, jet, schedule, Side::Sub);
}

double semiconcavity_constant(const ValueField& field, int k) {
    const Grid& g = field.grid();
    if (k < 0 || k > g.time_steps())
        throw std::out_of_range("semiconcavity_constant: time index out of range");

    double max_second = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < g.node_count(); ++j) {
        for (int i = 0; i < g.dim(); ++i) {
            const int idx = g.axis_index(j, i);
            if (idx == 0 || idx == g.nodes_per_axis()[i] - 1) continue;
            const std::size_t str = g.stride(i);
            const double h = g.spacing()[i];
            const double second =
                (field.at(k, j + str) - 2.0 * field.at(k, j) + field.at(k, j - str)) / (h * h);
            max_second = std::max(max_second, second);
        }
    }
    double c0 = std::max(0.0, 0.5 * max_second);

    if (g.dim() > 1) {
        // midpoint concavity of v - C |x|^2 along random chords
        Rng rng(substream_seed(0x5ca1e, 17));
        const double t = g.time(k);
        for (int n = 0; n < 256; ++n) {
            Vec a(g.dim()), b(g.dim());
            for (int i = 0; i < g.dim(); ++i) {
                a[i] = rng.uniform(g.lo()[i], g.hi()[i]);
                b[i] = rng.uniform(g.lo()[i], g.hi()[i]);
            }
            const Vec mid = 0.5 * (a + b);
            const double bow = 0.5 * (field.query(t, a).value + field.query(t, b).value) -
                               field.query(t, mid).value;
            const double gap = 0.25 * (a - b).squaredNorm();
            if (gap > 1e-12) c0 = std::max(c0, bow / gap);
        }
        c0 = std::max(c0, 0.0);
    }
    return c0;
}

GrowthReport growth_check(const ValueField& field, int m) {
    if (m < 0) throw std::invalid_argument("growth_check: exponent must be >= 0");
    const Grid& g = field.grid();
    GrowthReport rep;
    rep.exponent = m;

    auto weight = [&](std::size_t j) {
        if (m == 0) return 1.0;
        return 1.0 + std::pow(g.node(j).norm(), m);
    };

    auto estimate = [&](int stride) {
        double worst = -std::numeric_limits<double>::infinity();
        for (int k = 0; k + stride <= g.time_steps(); k += stride) {
            const double span = stride * g.dt();
            for (std::size_t j = 0; j < g.node_count(); ++j) {
                const double ratio =
                    (field.at(k + stride, j) - field.at(k, j)) / (weight(j) * span);
                worst = std::max(worst, ratio);
            }
        }
        return worst;
    };

    rep.constant = estimate(1);
    rep.coarse_constant = g.time_steps() >= 2 ? estimate(2) : rep.constant;

    const bool finite = std::isfinite(rep.constant) && std::isfinite(rep.coarse_constant);
    const double a = rep.constant, b = rep.coarse_constant;
    bool stable = false;
    if (finite) {
        if (std::abs(a) <= 1e-9 && std::abs(b) <= 1e-9) {
            stable = true;
        } else if (a * b > 0.0) {
            const double ratio = std::abs(a) / std::abs(b);
            stable = ratio <= 2.0 && ratio >= 0.5;
        } else {
            stable = std::abs(a - b) <= 1e-6;
        }
    }
    rep.pass = finite && stable;
    return rep;
}

RegularityReport regularity_check(const ValueField& field) {
    const Grid& g = field.grid();
    RegularityReport rep;

    std::vector<bool> trusted(g.node_count());
    for (std::size_t j = 0; j < g.node_count(); ++j)
        trusted[j] = g.in_trust_region(g.node(j));

    for (int k = 0; k <= g.time_steps(); ++k) {
        for (std::size_t j = 0; j < g.node_count(); ++j) {
            if (!trusted[j]) continue;
            for (int i = 0; i < g.dim(); ++i) {
                for (int stride = 1;; stride *= 2) {
                    const int idx = g.axis_index(j, i);
                    if (idx + stride >= g.nodes_per_axis()[i]) break;
                    const std::size_t jn = j + g.stride(i) * static_cast<std::size_t>(stride);
                    if (!trusted[jn]) break;
                    const double dv = std::abs(field.at(k, jn) - field.at(k, j));
                    rep.lipschitz_x = std::max(rep.lipschitz_x, dv / (stride * g.spacing()[i]));
                }
            }
        }
    }

    for (std::size_t j = 0; j < g.node_count(); ++j) {
        if (!trusted[j]) continue;
        for (int k = 0; k <= g.time_steps(); ++k) {
            for (int stride = 1; k + stride <= g.time_steps(); stride *= 2) {
                const double dv = std::abs(field.at(k + stride, j) - field.at(k, j));
                rep.holder_t = std::max(rep.holder_t, dv / std::sqrt(stride * g.dt()));
            }
        }
    }
    return rep;
}

}  // namespace fbsc
