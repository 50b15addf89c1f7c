#include "fbsc/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fbsc/rng.hpp"

namespace fbsc {

namespace {

bool lex_less(const Vec& a, const Vec& b) {
    for (int i = 0; i < a.size(); ++i) {
        if (a[i] < b[i]) return true;
        if (a[i] > b[i]) return false;
    }
    return false;
}

}  // namespace

ControlSet::ControlSet(std::vector<Vec> points) : points_(std::move(points)) {
    if (points_.empty()) return;
    dim_ = static_cast<int>(points_.front().size());
    for (const auto& p : points_) {
        if (p.size() != dim_)
            throw std::invalid_argument("ControlSet: inconsistent control dimensions");
    }
    for (std::size_t i = 0; i + 1 < points_.size(); ++i)
        for (std::size_t j = i + 1; j < points_.size(); ++j)
            if (points_[i] == points_[j])
                throw std::invalid_argument("ControlSet: duplicate control point");
}

ControlSet ControlSet::lattice(const Vec& lo, const Vec& hi, int points_per_axis) {
    const int m = static_cast<int>(lo.size());
    if (hi.size() != m) throw std::invalid_argument("ControlSet::lattice: lo/hi size mismatch");
    if (points_per_axis < 1) throw std::invalid_argument("ControlSet::lattice: need >= 1 point");
    for (int i = 0; i < m; ++i)
        if (!(lo[i] <= hi[i]))
            throw std::invalid_argument("ControlSet::lattice: lo > hi");
    if (points_per_axis == 1) return ControlSet({(lo + hi) / 2.0});

    std::size_t total = 1;
    for (int i = 0; i < m; ++i) total *= static_cast<std::size_t>(points_per_axis);
    std::vector<Vec> pts;
    pts.reserve(total);
    std::vector<int> idx(m, 0);
    for (std::size_t n = 0; n < total; ++n) {
        Vec u(m);
        for (int i = 0; i < m; ++i)
            u[i] = lo[i] + (hi[i] - lo[i]) * idx[i] / (points_per_axis - 1);
        pts.push_back(u);
        for (int i = m - 1; i >= 0; --i) {
            if (++idx[i] < points_per_axis) break;
            idx[i] = 0;
        }
    }
    std::sort(pts.begin(), pts.end(), lex_less);
    return ControlSet(std::move(pts));
}

std::size_t ControlSet::nearest(const Vec& u) const {
    std::size_t best = 0;
    double best_d = (points_[0] - u).squaredNorm();
    for (std::size_t i = 1; i < points_.size(); ++i) {
        const double d = (points_[i] - u).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

void ControlProblem::validate() const {
    if (state_dim < 1) throw std::invalid_argument("ControlProblem: state_dim must be >= 1");
    if (control_dim < 1) throw std::invalid_argument("ControlProblem: control_dim must be >= 1");
    if (!(horizon > 0.0)) throw std::invalid_argument("ControlProblem: horizon must be > 0");
    if (!drift || !diffusion || !generator || !terminal)
        throw std::invalid_argument("ControlProblem: all four evaluators must be set");
    if (control_set.size() == 0)
        throw std::invalid_argument("ControlProblem: control set is empty");
    if (control_set.dim() != control_dim)
        throw std::invalid_argument("ControlProblem: control set dimension mismatch");
}

namespace {

struct PairSampler {
    Rng rng;
    const ControlProblem& p;
    Vec lo, hi;

    Vec state() {
        Vec x(p.state_dim);
        for (int i = 0; i < p.state_dim; ++i) x[i] = rng.uniform(lo[i], hi[i]);
        return x;
    }
    const Vec& control() {
        const std::size_t k =
            static_cast<std::size_t>(rng.uniform() * static_cast<double>(p.control_set.size()));
        return p.control_set[std::min(k, p.control_set.size() - 1)];
    }
};

std::string describe_point(double t, const Vec& x, const Vec* u) {
    std::ostringstream os;
    os << "t=" << t << " x=[";
    for (int i = 0; i < x.size(); ++i) os << (i ? " " : "") << x[i];
    os << "]";
    if (u) {
        os << " u=[";
        for (int i = 0; i < u->size(); ++i) os << (i ? " " : "") << (*u)[i];
        os << "]";
    }
    return os.str();
}

}  // namespace

LipschitzReport lipschitz_probe(const ControlProblem& problem, int samples,
                                std::uint64_t seed, const std::optional<SampleBox>& box) {
    problem.validate();
    if (samples < 2) throw std::invalid_argument("lipschitz_probe: need samples >= 2");

    Vec lo, hi;
    if (box) {
        lo = box->lo;
        hi = box->hi;
        if (lo.size() != problem.state_dim || hi.size() != problem.state_dim)
            throw std::invalid_argument("lipschitz_probe: box dimension mismatch");
    } else {
        lo = Vec::Constant(problem.state_dim, -5.0);
        hi = Vec::Constant(problem.state_dim, 5.0);
    }

    PairSampler s{Rng(substream_seed(seed, 0)), problem, lo, hi};
    LipschitzReport rep;
    rep.declared = problem.lipschitz_bound;

    auto track = [](LipschitzRatio& r, double diff, double dist) {
        if (dist <= 0.0) return;
        const double ratio = diff / dist;
        if (ratio > r.observed) {
            r.observed = ratio;
            r.at_distance = dist;
        }
    };

    for (int n = 0; n < samples; ++n) {
        const double t = s.rng.uniform(0.0, problem.horizon);
        const Vec x1 = s.state(), x2 = s.state();
        const Vec u1 = s.control(), u2 = s.control();
        const double y1 = s.rng.uniform(-5.0, 5.0), y2 = s.rng.uniform(-5.0, 5.0);
        Vec z1(problem.state_dim), z2(problem.state_dim);
        for (int i = 0; i < problem.state_dim; ++i) {
            z1[i] = s.rng.uniform(-5.0, 5.0);
            z2[i] = s.rng.uniform(-5.0, 5.0);
        }

        const double dxu = (x1 - x2).norm() + (u1 - u2).norm();
        const double dfull = dxu + std::abs(y1 - y2) + (z1 - z2).norm();
        try {
            track(rep.drift, (problem.drift(t, x1, u1) - problem.drift(t, x2, u2)).norm(), dxu);
            track(rep.diffusion,
                  (problem.diffusion(t, x1, u1) - problem.diffusion(t, x2, u2)).norm(), dxu);
            track(rep.generator,
                  std::abs(problem.generator(t, x1, y1, z1, u1) -
                           problem.generator(t, x2, y2, z2, u2)),
                  dfull);
            track(rep.terminal, std::abs(problem.terminal(x1) - problem.terminal(x2)),
                  (x1 - x2).norm());
        } catch (const std::exception& e) {
            rep.detail = std::string("evaluator failed at ") + describe_point(t, x1, &u1) +
                         ": " + e.what();
            throw std::runtime_error("lipschitz_probe: " + rep.detail);
        }
        for (auto* v : {&rep.drift, &rep.diffusion, &rep.generator, &rep.terminal}) {
            if (!std::isfinite(v->observed))
                throw std::runtime_error("lipschitz_probe: non-finite evaluator value at " +
                                         describe_point(t, x1, &u1));
        }
    }

    if (rep.declared) {
        const double limit = 1.01 * *rep.declared;
        auto flag = [&](const LipschitzRatio& r, const char* which) {
            if (r.observed > limit) {
                rep.violation = true;
                if (!rep.detail.empty()) rep.detail += "; ";
                rep.detail += std::string(which) + " ratio " + format_double(r.observed) +
                              " exceeds declared " + format_double(*rep.declared);
            }
        };
        flag(rep.drift, "drift");
        flag(rep.diffusion, "diffusion");
        flag(rep.generator, "generator");
        flag(rep.terminal, "terminal");
    }
    return rep;
}

namespace {

Vec scalar_vec(double v) {
    Vec x(1);
    x[0] = v;
    return x;
}

ControlProblem make_lq1d(double horizon) {
    ControlProblem p;
    p.name = "lq1d";
    p.state_dim = 1;
    p.control_dim = 1;
    p.horizon = horizon;
    p.drift = [](double, const Vec&, const Vec& u) { return u; };
    p.diffusion = [](double, const Vec&, const Vec&) { return Mat::Identity(1, 1); };
    p.generator = [](double, const Vec&, double, const Vec&, const Vec& u) {
        return u[0] * u[0];
    };
    p.terminal = [](const Vec& x) { return x[0] * x[0]; };
    p.control_set = ControlSet::lattice(scalar_vec(-3.0), scalar_vec(3.0), 121);
    const double T = p.horizon;
    p.exact_value = [T](double t, const Vec& x) {
        const double rho = 1.0 + T - t;
        return x[0] * x[0] / rho + std::log(rho);
    };
    p.exact_policy = [T](double t, const Vec& x) {
        return scalar_vec(-x[0] / (1.0 + T - t));
    };
    return p;
}

ControlProblem make_kink1d(double horizon) {
    ControlProblem p;
    p.name = "kink1d";
    p.state_dim = 1;
    p.control_dim = 1;
    p.horizon = horizon;
    p.drift = [](double, const Vec&, const Vec& u) { return u; };
    p.diffusion = [](double, const Vec&, const Vec&) { return Mat::Zero(1, 1); };
    p.generator = [](double, const Vec&, double, const Vec&, const Vec&) { return 0.0; };
    p.terminal = [](const Vec& x) { return -std::abs(x[0]); };
    p.control_set = ControlSet::lattice(scalar_vec(-1.0), scalar_vec(1.0), 41);
    const double T = p.horizon;
    p.exact_value = [T](double t, const Vec& x) { return -(std::abs(x[0]) + T - t); };
    p.exact_policy = [](double, const Vec& x) {
        return scalar_vec(x[0] >= 0.0 ? 1.0 : -1.0);
    };
    return p;
}

ControlProblem make_martingale1d(double horizon) {
    ControlProblem p;
    p.name = "martingale1d";
    p.state_dim = 1;
    p.control_dim = 1;
    p.horizon = horizon;
    p.drift = [](double, const Vec&, const Vec&) { return Vec::Zero(1); };
    p.diffusion = [](double, const Vec&, const Vec&) { return Mat::Identity(1, 1); };
    p.generator = [](double, const Vec&, double, const Vec&, const Vec&) { return 0.0; };
    p.terminal = [](const Vec& x) { return x[0]; };
    p.control_set = ControlSet::lattice(scalar_vec(-1.0), scalar_vec(1.0), 3);
    p.exact_value = [](double, const Vec& x) { return x[0]; };
    p.exact_policy = [](double, const Vec&) { return scalar_vec(0.0); };
    return p;
}

}  // namespace

ControlProblem builtin(const std::string& name) { return builtin(name, 1.0); }

ControlProblem builtin(const std::string& name, double horizon) {
    if (!(horizon > 0.0)) throw std::invalid_argument("builtin: horizon must be > 0");
    if (name == "lq1d") return make_lq1d(horizon);
    if (name == "kink1d") return make_kink1d(horizon);
    if (name == "martingale1d") return make_martingale1d(horizon);
    throw std::invalid_argument("unknown builtin problem '" + name +
                                "'; available: lq1d, kink1d, martingale1d");
}

}  // namespace fbsc
