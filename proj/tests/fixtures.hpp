#pragma once

// Shared solved fixtures, built once per test binary.

#include "fbsc/hjb.hpp"

namespace fixtures {

inline fbsc::Vec v1(double x) {
    fbsc::Vec v(1);
    v[0] = x;
    return v;
}

struct SolvedProblem {
    fbsc::ControlProblem problem;
    fbsc::Grid grid;
    fbsc::ValueField field;
    fbsc::FeedbackPolicy policy;
};

/// lq1d on [-4, 4], h = 0.05, CFL dt, with its synthesized policy.
inline const SolvedProblem& lq1d_solved() {
    static const SolvedProblem fixture = [] {
        fbsc::ControlProblem p = fbsc::builtin("lq1d");
        const int steps = fbsc::cfl_time_steps(p, v1(-4.0), v1(4.0), {161});
        fbsc::Grid g(v1(-4.0), v1(4.0), {161}, steps, p.horizon);
        fbsc::ValueField f = fbsc::solve_hjb(p, g);
        fbsc::FeedbackPolicy pol = fbsc::synthesize_policy(p, f);
        return SolvedProblem{std::move(p), std::move(g), std::move(f), std::move(pol)};
    }();
    return fixture;
}

/// kink1d on [-2, 2], h = 0.01, CFL dt, with its synthesized policy.
inline const SolvedProblem& kink1d_solved() {
    static const SolvedProblem fixture = [] {
        fbsc::ControlProblem p = fbsc::builtin("kink1d");
        const int steps = fbsc::cfl_time_steps(p, v1(-2.0), v1(2.0), {401});
        fbsc::Grid g(v1(-2.0), v1(2.0), {401}, steps, p.horizon);
        fbsc::ValueField f = fbsc::solve_hjb(p, g);
        fbsc::FeedbackPolicy pol = fbsc::synthesize_policy(p, f);
        return SolvedProblem{std::move(p), std::move(g), std::move(f), std::move(pol)};
    }();
    return fixture;
}

/// Feedback policy sampled from a closed-form law on a fine lattice.
inline fbsc::FeedbackPolicy analytic_policy(const fbsc::ControlProblem& problem,
                                            const fbsc::Grid& grid) {
    std::vector<std::uint32_t> idx(
        static_cast<std::size_t>(grid.time_steps() + 1) * grid.node_count());
    for (int k = 0; k <= grid.time_steps(); ++k)
        for (std::size_t j = 0; j < grid.node_count(); ++j)
            idx[static_cast<std::size_t>(k) * grid.node_count() + j] =
                static_cast<std::uint32_t>(problem.control_set.nearest(
                    problem.exact_policy(grid.time(k), grid.node(j))));
    return fbsc::FeedbackPolicy(grid, problem.control_set, std::move(idx));
}

}  // namespace fixtures
