// Acceptance suite: one line per criterion, tolerances pinned in code.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "fbsc/config.hpp"
#include "fbsc/io.hpp"
#include "fbsc/rng.hpp"
#include "fbsc/verify.hpp"
#include "oracles.hpp"

using namespace fbsc;

namespace {

Vec v1(double x) {
    Vec v(1);
    v[0] = x;
    return v;
}

struct Criterion {
    std::string name;
    bool ok = true;
    std::ostringstream detail;

    void require(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            detail << " [FAILED: " << what << "]";
        }
    }
    template <typename T>
    void note(const std::string& key, T value) {
        detail << ' ' << key << '=' << value;
    }
};

int failures = 0;

void report(const Criterion& c) {
    std::printf("%-44s %s%s\n", c.name.c_str(), c.ok ? "PASS" : "FAIL",
                c.detail.str().c_str());
    if (!c.ok) ++failures;
}

double now_seconds() {
    using clock = std::chrono::steady_clock;
    static const clock::time_point start = clock::now();
    return std::chrono::duration<double>(clock::now() - start).count();
}

JetCandidate jet1(double p, double q, double theta) {
    JetCandidate j;
    j.p = p;
    j.q = v1(q);
    j.theta = Mat::Constant(1, 1, theta);
    return j;
}

McRun mc_run(int paths, double dt, std::uint64_t seed) {
    McRun mc;
    mc.paths = paths;
    mc.dt = dt;
    mc.seed = seed;
    return mc;
}

}  // namespace

int main() {
    const ControlProblem lq = builtin("lq1d");
    const ControlProblem kink = builtin("kink1d");
    const ControlProblem mart = builtin("martingale1d");

    // ---- 1. LQ value ----------------------------------------------------
    const double t_solve_start = now_seconds();
    const int lq_steps = cfl_time_steps(lq, v1(-4.0), v1(4.0), {161});
    const Grid lq_grid(v1(-4.0), v1(4.0), {161}, lq_steps, lq.horizon);  // h = 0.05
    const ValueField lq_field = solve_hjb(lq, lq_grid);
    const double solve_seconds = now_seconds() - t_solve_start;
    {
        Criterion c{"[1] lq value vs closed form"};
        const double v00 = lq_field.query(0.0, v1(0.0)).value;
        const double origin_err = std::abs(v00 - std::log(2.0));
        double max_err = 0.0;
        for (double t : {0.0, 0.25, 0.5})
            for (std::size_t j = 0; j < lq_grid.node_count(); ++j) {
                const Vec x = lq_grid.node(j);
                if (std::abs(x[0]) > 2.0) continue;
                max_err = std::max(max_err, std::abs(lq_field.query(t, x).value -
                                                     lq.exact_value(t, x)));
            }
        c.note("v00_err", origin_err);
        c.note("max_err", max_err);
        c.note("seconds", solve_seconds);
        c.require(origin_err <= 0.02, "|v(0,0) - ln 2| <= 0.02");
        c.require(max_err <= 0.03, "max error <= 0.03 on |x|<=2, t in {0,.25,.5}");
        c.require(solve_seconds <= 60.0, "runtime <= 60 s");
        report(c);
    }

    // ---- 2. LQ policy ---------------------------------------------------
    const FeedbackPolicy lq_policy = synthesize_policy(lq, lq_field);
    {
        Criterion c{"[2] lq synthesized feedback"};
        double worst = 0.0;
        for (int k = 0; k <= lq_grid.time_steps(); ++k) {
            const double t = lq_grid.time(k);
            if (t > 0.9) continue;
            for (std::size_t j = 0; j < lq_grid.node_count(); ++j) {
                const double x = lq_grid.node(j)[0];
                if (std::abs(x) > 2.0) continue;
                worst = std::max(worst, std::abs(lq_policy.control_at(k, j)[0] +
                                                 x / (1.0 + lq.horizon - t)));
            }
        }
        c.note("max_dev", worst);
        c.require(worst <= 0.05, "policy within one lattice step of -x/(1+T-t)");
        report(c);
    }

    // ---- 3. verification theorem, optimal branch ------------------------
    {
        Criterion c{"[3] verify optimal pair"};
        const auto rep = verify_pair(lq, lq_field, PolicyControl{&lq_policy}, 0.0, v1(0.0),
                                     mc_run(10000, 0.01, 20260808));
        c.note("verdict", to_string(rep.verdict));
        c.note("gap", rep.gap_integral_mean);
        c.note("J_err", std::abs(rep.cost.mean - std::log(2.0)));
        c.require(rep.verdict == Verdict::CertifiedOptimal, "verdict CERTIFIED_OPTIMAL");
        c.require(rep.gap_integral_mean <= 0.05, "gap integral <= 0.05");
        c.require(std::abs(rep.cost.mean - std::log(2.0)) <= 3.0 * rep.cost.stderr_ + 0.03,
                  "|J - ln 2| <= 3 stderr + 0.03");
        report(c);
    }

    // ---- 4. suboptimal branch + gap identity -----------------------------
    {
        Criterion c{"[4] verify suboptimal pair + identity"};
        const auto rep = verify_pair(lq, lq_field, ConstantControl{v1(0.0)}, 0.0, v1(0.0),
                                     mc_run(10000, 0.01, 20260808));
        const double expected = 1.0 - std::log(2.0);
        c.note("verdict", to_string(rep.verdict));
        c.note("opt_gap", rep.optimality_gap);
        c.note("ham_gap", rep.gap_integral_mean);
        c.require(rep.verdict == Verdict::Suboptimal, "verdict SUBOPTIMAL");
        c.require(std::abs(rep.optimality_gap - expected) <= 3.0 * rep.cost.stderr_ + 0.05,
                  "optimality gap = 1 - ln 2 within 3 stderr + 0.05");
        c.require(std::abs(rep.gap_integral_mean - expected) <=
                      3.0 * rep.gap_integral_stderr + 0.05,
                  "gap integral = 1 - ln 2 within 3 stderr + 0.05");
        c.require(std::abs(rep.optimality_gap - rep.gap_integral_mean) <=
                      3.0 * (rep.cost.stderr_ + rep.gap_integral_stderr) + 0.05,
                  "both estimates agree under the shared seed");
        report(c);
    }

    // ---- 5. non-smooth superjets -----------------------------------------
    {
        Criterion c{"[5] superjets at the kink"};
        const double t_start = now_seconds();
        const FieldView view =
            make_view(kink.exact_value, v1(-2.0), v1(2.0), kink.horizon);
        const NeighborhoodSchedule sched = NeighborhoodSchedule::defaults(0.05);

        std::vector<JetCandidate> accepted;
        for (double q : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
            const auto r = test_superjet(view, 0.5, v1(0.0), jet1(1.0, q, 0.0), sched);
            c.require(r.accepted, "superjet (1, " + std::to_string(q) + ", 0) accepted");
            if (r.accepted) accepted.push_back(jet1(1.0, q, 0.0));
        }
        c.require(!test_superjet(view, 0.5, v1(0.0), jet1(1.0, 1.0, -0.5), sched).accepted,
                  "superjet (1, 1, -0.5) rejected");
        c.require(!test_superjet(view, 0.5, v1(0.0), jet1(1.0, 1.2, 0.0), sched).accepted,
                  "superjet (1, 1.2, 0) rejected");
        int sub_accepts = 0;
        for (double q : {-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5})
            for (double theta : {-1.0, 0.0, 1.0})
                if (test_subjet(view, 0.5, v1(0.0), jet1(1.0, q, theta), sched).accepted)
                    ++sub_accepts;
        c.note("subjet_accepts", sub_accepts);
        c.require(sub_accepts == 0, "subjet test rejects all sampled jets at the kink");

        const auto ineq =
            superjet_inequality_check(kink, view, {{0.5, v1(0.0)}}, {accepted}, 1e-8);
        c.note("violations", ineq.violations);
        c.note("worst", ineq.worst_value);
        c.require(ineq.violations == 0, "p + min_u H >= 0 across accepted jets");
        const double elapsed = now_seconds() - t_start;
        c.note("seconds", elapsed);
        c.require(elapsed <= 10.0, "runtime <= 10 s");
        report(c);
    }

    // ---- 6. semiconcavity and growth --------------------------------------
    {
        Criterion c{"[6] semiconcavity + growth estimates"};
        const Grid gk(v1(-2.0), v1(2.0), {201}, 64, kink.horizon);
        const ValueField kink_exact = sample_field(gk, kink.exact_value);
        const Grid gl(v1(-4.0), v1(4.0), {161}, 64, lq.horizon);
        const ValueField lq_exact = sample_field(gl, lq.exact_value);

        const double c_kink = semiconcavity_constant(kink_exact, 0);
        const double c_lq = semiconcavity_constant(lq_exact, 0);
        c.note("kink_C0", c_kink);
        c.note("lq_C0", c_lq);
        c.require(std::abs(c_kink) <= 1e-9, "kink semiconcavity constant = 0");
        c.require(std::abs(c_lq - 0.5) <= 0.02, "lq semiconcavity constant = 0.5");

        const auto gk2 = growth_check(kink_exact, 2);
        const auto gl2 = growth_check(lq_exact, 2);
        c.note("kink_growth", gk2.constant);
        c.note("lq_growth", gl2.constant);
        c.require(gk2.pass, "kink growth estimate stable");
        c.require(gl2.pass, "lq growth estimate stable");
        report(c);
    }

    // ---- 7. regularity stability under refinement -------------------------
    {
        Criterion c{"[7] regularity constants under h -> h/2"};
        const auto coarse = regularity_check(lq_field);  // h = 0.05
        const int fine_steps = cfl_time_steps(lq, v1(-4.0), v1(4.0), {321});
        const Grid fine_grid(v1(-4.0), v1(4.0), {321}, fine_steps, lq.horizon);
        const auto fine = regularity_check(solve_hjb(lq, fine_grid));  // h = 0.025
        const double lip_ratio = fine.lipschitz_x / coarse.lipschitz_x;
        const double holder_ratio = fine.holder_t / coarse.holder_t;
        c.note("lip", coarse.lipschitz_x);
        c.note("lip_ratio", lip_ratio);
        c.note("holder", coarse.holder_t);
        c.note("holder_ratio", holder_ratio);
        c.require(lip_ratio <= 2.0 && lip_ratio >= 0.5, "Lipschitz constant within factor 2");
        c.require(holder_ratio <= 2.0 && holder_ratio >= 0.5,
                  "Hoelder constant within factor 2");
        report(c);
    }

    // ---- 8. property suites ------------------------------------------------
    {
        Criterion c{"[8a] comparison principle (20 pairs)"};
        Rng rng(55001);
        bool all = true;
        for (int trial = 0; trial < 20 && all; ++trial) {
            const double beta = rng.uniform(-1.0, 1.0);
            const double sigma = rng.uniform(0.0, 1.0);
            const double alpha = rng.uniform(-0.5, 0.5);
            const double a1 = rng.uniform(-1, 1), b1 = rng.uniform(-1, 1);
            const double bump = rng.uniform(0.0, 1.0);
            ControlProblem p;
            p.state_dim = 1;
            p.control_dim = 1;
            p.horizon = 0.5;
            p.drift = [beta](double, const Vec&, const Vec& u) { return Vec(beta * u); };
            p.diffusion = [sigma](double, const Vec&, const Vec&) {
                return Mat(Mat::Constant(1, 1, sigma));
            };
            p.generator = [alpha](double, const Vec&, double y, const Vec&, const Vec& u) {
                return alpha * y + u[0] * u[0];
            };
            p.control_set = ControlSet::lattice(v1(-1.0), v1(1.0), 5);
            p.lipschitz_bound = 2.0;
            auto phi1 = [a1, b1](const Vec& x) { return a1 + b1 * std::sin(2.0 * x[0]); };
            p.terminal = phi1;
            const int steps = cfl_time_steps(p, v1(-2.0), v1(2.0), {41});
            const Grid g(v1(-2.0), v1(2.0), {41}, steps, p.horizon);
            const ValueField f1 = solve_hjb(p, g);
            p.terminal = [phi1, bump](const Vec& x) {
                const double b = bump * std::cos(x[0]);
                return phi1(x) + b * b;
            };
            const ValueField f2 = solve_hjb(p, g);
            for (int k = 0; k <= g.time_steps() && all; ++k)
                for (std::size_t j = 0; j < g.node_count(); ++j)
                    if (!(f1.at(k, j) <= f2.at(k, j) + 1e-12)) {
                        all = false;
                        break;
                    }
        }
        c.require(all, "Phi1 <= Phi2 implies v1 <= v2 + 1e-12 nodewise");
        report(c);
    }
    {
        Criterion c{"[8b] hamiltonian_min lower bound (1e3)"};
        Rng rng(55002);
        bool all = true;
        for (int n = 0; n < 1000 && all; ++n) {
            const double t = rng.uniform(0.0, 1.0);
            const Vec x = v1(rng.uniform(-4, 4));
            const double psi = rng.uniform(-2, 2);
            const Vec q = v1(rng.uniform(-5, 5));
            const Mat theta = Mat::Constant(1, 1, rng.uniform(-4, 4));
            const auto hm = hamiltonian_min(lq, t, x, psi, q, theta);
            for (std::size_t u = 0; u < lq.control_set.size(); ++u)
                if (hm.value > hamiltonian(lq, t, x, psi, q, theta, lq.control_set[u]) + 1e-12) {
                    all = false;
                    break;
                }
        }
        c.require(all, "min over the set bounds every control");
        report(c);
    }
    {
        Criterion c{"[8c] martingale end-to-end"};
        const int steps = cfl_time_steps(mart, v1(-6.0), v1(6.0), {241});
        const Grid g(v1(-6.0), v1(6.0), {241}, steps, mart.horizon);
        const ValueField field = solve_hjb(mart, g);
        double max_err = 0.0;
        for (std::size_t j = 0; j < g.node_count(); ++j) {
            const Vec x = g.node(j);
            if (!g.in_trust_region(x)) continue;
            max_err = std::max(max_err, std::abs(field.at(0, j) - x[0]));
        }
        c.note("field_err", max_err);
        c.require(max_err <= 1e-6, "v(0,x) = x within 1e-6 on the trust region");
        const auto cost =
            estimate_cost(mart, ConstantControl{v1(0.0)}, 0.0, v1(5.0), 10000, 0.01, 99101);
        c.note("J", cost.mean);
        c.require(std::abs(cost.mean - 5.0) <= 3.0 * cost.stderr_,
                  "estimate_cost(y=5) = 5 within 3 stderr");
        report(c);
    }
    {
        Criterion c{"[8d] Monte Carlo reproducibility"};
        const auto a = simulate_forward(lq, PolicyControl{&lq_policy}, 0.0, v1(0.0), 512,
                                        0.01, 424242);
        const auto b = simulate_forward(lq, PolicyControl{&lq_policy}, 0.0, v1(0.0), 512,
                                        0.01, 424242);
        c.require(a.x == b.x && a.dw == b.dw && a.u == b.u,
                  "identical seeds reproduce the bundle bit-for-bit");
        const auto other = simulate_forward(lq, PolicyControl{&lq_policy}, 0.0, v1(0.0), 512,
                                            0.01, 424243);
        c.require(a.dw != other.dw, "different seeds differ");
        report(c);
    }
    {
        Criterion c{"[8e] smooth jet calibration (20 points)"};
        Rng rng(55005);
        const NeighborhoodSchedule sched = NeighborhoodSchedule::defaults(0.05);
        bool all = true;
        for (int n = 0; n < 20 && all; ++n) {
            const double a = rng.uniform(-2.0, 2.0);
            const double b = rng.uniform(-1.0, 1.0);
            const double slope = rng.uniform(-1.5, 1.5);
            const auto fn = [a, b, slope](double t, const Vec& x) {
                return 0.5 * a * x[0] * x[0] + b * x[0] + slope * t;
            };
            const FieldView view = make_view(fn, v1(-3.0), v1(3.0), 1.0);
            const double t0 = rng.uniform(0.0, 0.9);
            const double x0 = rng.uniform(-2.0, 2.0);
            for (double d : {0.0, 0.1, 1.0})
                for (double e : {0.0, 0.1, 1.0}) {
                    if (!test_superjet(view, t0, v1(x0), jet1(slope + d, a * x0 + b, a + e),
                                       sched)
                             .accepted ||
                        !test_subjet(view, t0, v1(x0), jet1(slope - d, a * x0 + b, a - e),
                                     sched)
                             .accepted)
                        all = false;
                }
        }
        c.require(all, "classical jets of smooth fields pass the one-sided tests");
        report(c);
    }

    std::printf("%s: %d criterion(s) failed\n", failures == 0 ? "SUCCESS" : "FAILURE",
                failures);
    return failures;
}
