#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "fbsc/config.hpp"
#include "fbsc/hjb.hpp"
#include "fbsc/io.hpp"

namespace {

using namespace fbsc;

struct CommonArgs {
    std::string config_path;
    std::string out_override;
    std::optional<std::uint64_t> seed;
    std::optional<int> paths;
};

std::string out_dir(const RunConfig& cfg, const CommonArgs& args) {
    return args.out_override.empty() ? config_output_dir(cfg) : args.out_override;
}

std::string seed_label(const std::optional<std::uint64_t>& seed) {
    return seed ? std::to_string(*seed) : "none";
}

/// Builds the control law named by the config; synthesizes the policy from a
/// fresh solve when requested.
struct ControlBundle {
    ControlLaw law{ConstantControl{}};
    std::optional<FeedbackPolicy> policy;  // keeps the policy alive for the law
    std::optional<ValueField> field;
};

ControlBundle build_control(const RunConfig& cfg, const ControlProblem& problem) {
    ControlBundle out;
    const ControlSpec spec = config_control(cfg, problem);
    if (spec.kind == ControlSpec::Kind::Constant) {
        out.law = ConstantControl{spec.constant};
        return out;
    }
    const Grid grid = config_grid(cfg, problem);
    out.field = solve_hjb(problem, grid);
    out.policy = synthesize_policy(problem, *out.field);
    out.law = PolicyControl{&*out.policy};
    return out;
}

int cmd_solve(const CommonArgs& args) {
    const RunConfig cfg = RunConfig::parse_file(args.config_path);
    const ControlProblem problem = config_problem(cfg);
    const Grid grid = config_grid(cfg, problem);
    const CflReport cfl = check_cfl(problem, grid);
    if (!cfl.ok) {
        std::cerr << "solve: refusing to run, " << cfl.summary() << "\n";
        return 1;
    }
    const ValueField field = solve_hjb(problem, grid);
    const std::string dir = out_dir(cfg, args);
    write_field_csv(dir + "/field.csv", field);
    write_manifest(dir, "solve", cfg.text(),
                   cfg.has("mc", "seed") ? cfg.get_string("mc", "seed") : "none");

    std::ostringstream summary;
    summary << cfl.summary() << '\n';
    summary << "grid: dim=" << grid.dim() << " nodes=" << grid.node_count()
            << " time_steps=" << grid.time_steps() << " dt=" << format_double(grid.dt())
            << '\n';
    summary << "rows=" << (static_cast<std::size_t>(grid.time_steps() + 1) * grid.node_count())
            << '\n';
    if (problem.exact_value) {
        double err = 0.0;
        for (std::size_t j = 0; j < grid.node_count(); ++j) {
            const Vec x = grid.node(j);
            if (!grid.in_trust_region(x)) continue;
            err = std::max(err, std::abs(field.at(0, j) - problem.exact_value(0.0, x)));
        }
        summary << "max_error_vs_exact_t0=" << format_double(err) << '\n';
    }
    std::ofstream(dir + "/solve_summary.txt") << summary.str();
    std::cout << summary.str();
    return 0;
}

int cmd_policy(const CommonArgs& args) {
    const RunConfig cfg = RunConfig::parse_file(args.config_path);
    const ControlProblem problem = config_problem(cfg);
    const Grid grid = config_grid(cfg, problem);
    const ValueField field = solve_hjb(problem, grid);
    const FeedbackPolicy policy = synthesize_policy(problem, field);
    const std::string dir = out_dir(cfg, args);
    write_policy_csv(dir + "/policy.csv", policy);
    write_manifest(dir, "policy", cfg.text(),
                   cfg.has("mc", "seed") ? cfg.get_string("mc", "seed") : "none");
    std::cout << "policy: rows="
              << (static_cast<std::size_t>(grid.time_steps() + 1) * grid.node_count())
              << " controls=" << problem.control_set.size() << "\n";
    return 0;
}

int cmd_cost(const CommonArgs& args) {
    const RunConfig cfg = RunConfig::parse_file(args.config_path);
    const ControlProblem problem = config_problem(cfg);
    const McRun mc = config_mc(cfg, args.seed, args.paths);
    const auto [s, y] = config_start(cfg, problem);
    ControlBundle control = build_control(cfg, problem);

    PathBundle bundle = simulate_forward(problem, control.law, s, y, mc.paths, mc.dt, mc.seed);
    const CostEstimate cost = solve_bsde(problem, bundle, mc.regression);

    const std::string dir = out_dir(cfg, args);
    write_bundle_csv(dir + "/bundle.csv", bundle);
    write_report_csv(dir + "/cost.csv",
                     {{"cost_estimate", cost.mean, cost.stderr_, 0.0, true}});
    write_manifest(dir, "cost", cfg.text(), std::to_string(mc.seed));
    std::cout << "J = " << format_double(cost.mean) << " +/- " << format_double(cost.stderr_)
              << " (stderr), paths=" << mc.paths << "\n";
    return 0;
}

int cmd_verify(const CommonArgs& args) {
    const RunConfig cfg = RunConfig::parse_file(args.config_path);
    const ControlProblem problem = config_problem(cfg);
    const McRun mc = config_mc(cfg, args.seed, args.paths);
    const VerifyOptions options = config_verify_options(cfg);
    const auto [s, y] = config_start(cfg, problem);

    const Grid grid = config_grid(cfg, problem);
    const ValueField field = solve_hjb(problem, grid);
    ControlBundle control;
    const ControlSpec spec = config_control(cfg, problem);
    std::optional<FeedbackPolicy> policy;
    if (spec.kind == ControlSpec::Kind::Policy) {
        policy = synthesize_policy(problem, field);
        control.law = PolicyControl{&*policy};
    } else {
        control.law = ConstantControl{spec.constant};
    }

    const VerificationReport rep = verify_pair(problem, field, control.law, s, y, mc, options);
    auto rows = report_rows(rep);
    std::string feedback_line;
    if (policy) {
        const int samples = cfg.has("verify", "sample_points")
                                ? cfg.get_int("verify", "sample_points")
                                : 200;
        const auto fb = verify_feedback(problem, field, *policy, samples, mc.seed, options);
        rows.push_back({"feedback_pass_fraction", fb.pass_fraction, 0.0, 0.95,
                        fb.pass_fraction >= 0.95});
        std::ostringstream os;
        os << "  feedback spot check: " << fb.points_passed << "/" << fb.points_checked
           << " points pass (worst residual " << format_double(fb.worst_residual) << ")\n";
        feedback_line = os.str();
    }
    const std::string dir = out_dir(cfg, args);
    write_report_csv(dir + "/report.csv", rows);
    std::ofstream(dir + "/report.txt") << report_text(rep) << feedback_line;
    write_manifest(dir, "verify", cfg.text(), std::to_string(mc.seed));
    std::cout << report_text(rep) << feedback_line;
    switch (rep.verdict) {
        case Verdict::CertifiedOptimal: return 0;
        case Verdict::Suboptimal: return 2;
        case Verdict::Inconclusive: return 3;
    }
    return 3;
}

std::vector<JetCandidate> parse_candidates(const std::string& path, int dim) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("jets: cannot open candidates file '" + path + "'");
    std::vector<JetCandidate> out;
    std::string raw;
    int lineno = 0;
    const int expected = 1 + dim + dim * dim;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        for (char& c : raw)
            if (c == ',') c = ' ';
        std::istringstream is(raw);
        std::vector<double> vals;
        double v;
        while (is >> v) vals.push_back(v);
        if (vals.empty()) continue;
        std::string trailing;
        if (is.clear(), is >> trailing; !trailing.empty())
            throw std::invalid_argument("jets: candidates line " + std::to_string(lineno) +
                                        ": non-numeric token '" + trailing + "'");
        if (static_cast<int>(vals.size()) != expected)
            throw std::invalid_argument("jets: candidates line " + std::to_string(lineno) +
                                        ": expected " + std::to_string(expected) +
                                        " values (p, q..., theta row-major), got " +
                                        std::to_string(vals.size()));
        JetCandidate jet;
        jet.p = vals[0];
        jet.q = Vec(dim);
        for (int i = 0; i < dim; ++i) jet.q[i] = vals[1 + i];
        jet.theta = Mat(dim, dim);
        for (int i = 0; i < dim; ++i)
            for (int l = 0; l < dim; ++l) jet.theta(i, l) = vals[1 + dim + i * dim + l];
        try {
            jet.validate();
        } catch (const std::exception& e) {
            throw std::invalid_argument("jets: candidates line " + std::to_string(lineno) +
                                        ": " + e.what());
        }
        out.push_back(jet);
    }
    return out;
}

int cmd_jets(const CommonArgs& args, const std::string& point_str,
             const std::string& candidates_path, const std::string& side) {
    const RunConfig cfg = RunConfig::parse_file(args.config_path);
    const ControlProblem problem = config_problem(cfg);
    const Grid grid = config_grid(cfg, problem);

    std::istringstream ps(point_str);
    std::vector<double> pt;
    double v;
    while (ps >> v) pt.push_back(v);
    if (static_cast<int>(pt.size()) != problem.state_dim + 1)
        throw std::invalid_argument("jets: --point expects 't x1 .. xd'");
    const double t0 = pt[0];
    Vec x0(problem.state_dim);
    for (int i = 0; i < problem.state_dim; ++i) x0[i] = pt[i + 1];
    if (!grid.in_trust_region(x0))
        throw std::invalid_argument("jets: point lies outside the trust region");

    FieldView view;
    std::optional<ValueField> solved;
    if (config_jet_field(cfg, problem) == "exact") {
        view = make_view(problem.exact_value, grid.trust_lo(), grid.trust_hi(),
                         problem.horizon);
    } else {
        solved = solve_hjb(problem, grid);
        view = make_view(*solved);
    }
    const NeighborhoodSchedule schedule = NeighborhoodSchedule::defaults(grid.max_spacing());

    const std::vector<JetCandidate> candidates =
        parse_candidates(candidates_path, problem.state_dim);
    std::vector<JetRow> rows;
    for (const JetCandidate& jet : candidates) {
        const JetTestResult r = side == "sub" ? test_subjet(view, t0, x0, jet, schedule)
                                              : test_superjet(view, t0, x0, jet, schedule);
        rows.push_back({jet, r.accepted, r.worst_ratio});
        std::cout << (r.accepted ? "accept" : "reject") << " p=" << format_double(jet.p)
                  << " q=[";
        for (int i = 0; i < jet.q.size(); ++i)
            std::cout << (i ? " " : "") << format_double(jet.q[i]);
        std::cout << "] worst_ratio=" << format_double(r.worst_ratio) << " at t="
                  << format_double(r.worst_t) << " x=[";
        for (int i = 0; i < r.worst_x.size(); ++i)
            std::cout << (i ? " " : "") << format_double(r.worst_x[i]);
        std::cout << "]\n";
    }
    const std::string dir = out_dir(cfg, args);
    write_jets_csv(dir + "/jets.csv", rows, problem.state_dim);
    write_manifest(dir, "jets", cfg.text(), "none");
    std::cout << "jets: " << rows.size() << " candidates tested (" << side << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fbsc: grid solver, Monte Carlo cost estimation and optimality "
                 "verification for controlled forward-backward systems"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string point_str, candidates_path, side = "super";

    auto add_common = [&](CLI::App* sub, bool mc) {
        sub->add_option("--config", args.config_path, "run configuration file")->required();
        sub->add_option("--out", args.out_override, "output directory override");
        if (mc) {
            sub->add_option("--seed", [&args](const CLI::results_t& r) {
                args.seed = std::stoull(r[0]);
                return true;
            }, "Monte Carlo seed override");
            sub->add_option("--paths", [&args](const CLI::results_t& r) {
                args.paths = std::stoi(r[0]);
                return true;
            }, "Monte Carlo path-count override");
        }
    };

    add_common(app.add_subcommand("solve", "solve the dynamic-programming PDE on the grid"),
               false);
    add_common(app.add_subcommand("policy", "solve and synthesize the feedback policy"),
               false);
    add_common(app.add_subcommand("cost", "estimate the cost J(s,y;u) by Monte Carlo"), true);
    add_common(app.add_subcommand(
                   "verify", "certify a control against the solved field "
                             "(exit 0 certified, 2 suboptimal, 3 inconclusive)"),
               true);
    auto* jets = app.add_subcommand("jets", "test jet candidates at a point");
    add_common(jets, false);
    jets->add_option("--point", point_str, "probe point 't x1 .. xd'")->required();
    jets->add_option("--candidates", candidates_path,
                     "CSV of candidates: p, q..., theta (row-major)")
        ->required();
    jets->add_option("--side", side, "super (default) or sub")
        ->check(CLI::IsMember({"super", "sub"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("solve")) return cmd_solve(args);
        if (app.got_subcommand("policy")) return cmd_policy(args);
        if (app.got_subcommand("cost")) return cmd_cost(args);
        if (app.got_subcommand("verify")) return cmd_verify(args);
        if (app.got_subcommand("jets")) return cmd_jets(args, point_str, candidates_path, side);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
