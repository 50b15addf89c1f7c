#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fbsc/config.hpp"
#include "fbsc/io.hpp"
#include "fixtures.hpp"

using namespace fbsc;
using fixtures::v1;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

const char* kLqConfig = R"(# benchmark
[problem]
name = lq1d

[grid]
lo = -4
hi = 4
nodes = 81
cfl = auto

[mc]
paths = 500
dt = 0.01
seed = 9

[verify]
control = constant 0
start = 0 0

[output]
dir = out
)";

}  // namespace

TEST_CASE("config: parses sections, keys and values") {
    const auto cfg = RunConfig::parse_string(kLqConfig);
    CHECK(cfg.get_string("problem", "name") == "lq1d");
    CHECK(cfg.get_int("grid", "nodes") == 81);
    CHECK(cfg.get_uint64("mc", "seed") == 9);
    CHECK(cfg.get_doubles("verify", "start") == std::vector<double>{0.0, 0.0});
    CHECK(cfg.has("grid", "cfl"));
    CHECK_FALSE(cfg.has("grid", "time_steps"));
}

TEST_CASE("config: unknown sections and keys are hard errors") {
    CHECK_THROWS_WITH_AS(RunConfig::parse_string("[nope]\nx = 1\n"),
                         doctest::Contains("unknown section"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(RunConfig::parse_string("[grid]\nnods = 81\n"),
                         doctest::Contains("unknown key"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(RunConfig::parse_string("lo = 1\n"),
                         doctest::Contains("outside any"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(RunConfig::parse_string("[grid]\nlo -4\n"),
                         doctest::Contains("key = value"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(RunConfig::parse_string("[grid]\nlo = 1\nlo = 2\n"),
                         doctest::Contains("duplicate"), std::invalid_argument);
}

TEST_CASE("config: problem building, builtin and custom") {
    const auto cfg = RunConfig::parse_string(kLqConfig);
    const auto p = config_problem(cfg);
    CHECK(p.name == "lq1d");
    CHECK(p.control_set.size() == 121);

    const auto custom = RunConfig::parse_string(R"(
[problem]
kind = custom
horizon = 1
control_lo = -3
control_hi = 3
control_points = 121
b = 0 0 1
sigma = 1 0 0
f = 0 0 0 0 0 0 1
phi = 0 0 1
)");
    const auto q = config_problem(custom);
    CHECK(q.drift(0.3, v1(2.0), v1(0.5))[0] == doctest::Approx(0.5));
    CHECK(q.diffusion(0.0, v1(0.0), v1(0.0))(0, 0) == doctest::Approx(1.0));
    CHECK(q.generator(0.0, v1(0.0), 0.0, v1(0.0), v1(2.0)) == doctest::Approx(4.0));
    CHECK(q.terminal(v1(3.0)) == doctest::Approx(9.0));

    CHECK_THROWS_AS(config_problem(RunConfig::parse_string("[problem]\nkind = custom\n")),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        config_problem(RunConfig::parse_string("[problem]\nname = lq1d\nkind = custom\n")),
        std::invalid_argument);
}

TEST_CASE("config: grid needs exactly one of time_steps and cfl") {
    const auto p = builtin("lq1d");
    auto cfg = RunConfig::parse_string("[grid]\nlo = -2\nhi = 2\nnodes = 41\ncfl = auto\n");
    const Grid g = config_grid(cfg, p);
    CHECK(check_cfl(p, g).ok);

    CHECK_THROWS_AS(
        config_grid(RunConfig::parse_string("[grid]\nlo = -2\nhi = 2\nnodes = 41\n"), p),
        std::invalid_argument);
    CHECK_THROWS_AS(
        config_grid(RunConfig::parse_string(
                        "[grid]\nlo = -2\nhi = 2\nnodes = 41\ncfl = auto\ntime_steps = 3\n"),
                    p),
        std::invalid_argument);
}

TEST_CASE("config: non-numeric values and bad formats are named in errors") {
    const auto cfg = RunConfig::parse_string("[grid]\nnodes = abc\n");
    CHECK_THROWS_WITH_AS(cfg.get_int("grid", "nodes"), doctest::Contains("grid.nodes"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        config_output_dir(RunConfig::parse_string("[output]\nformats = json\n")),
        doctest::Contains("csv"), std::invalid_argument);
}

TEST_CASE("config: Monte Carlo requires a seed") {
    const auto cfg = RunConfig::parse_string("[mc]\npaths = 10\ndt = 0.1\n");
    CHECK_THROWS_WITH_AS(config_mc(cfg), doctest::Contains("seed"), std::invalid_argument);
    const auto mc = config_mc(cfg, 123);
    CHECK(mc.seed == 123);
}

TEST_CASE("config: control and jet-field selectors") {
    const auto p = builtin("lq1d");
    auto spec = config_control(
        RunConfig::parse_string("[verify]\ncontrol = constant 1.5\n"), p);
    CHECK(spec.kind == ControlSpec::Kind::Constant);
    CHECK(spec.constant[0] == doctest::Approx(1.5));
    spec = config_control(RunConfig::parse_string("[verify]\ncontrol = policy\n"), p);
    CHECK(spec.kind == ControlSpec::Kind::Policy);
    CHECK_THROWS_AS(
        config_control(RunConfig::parse_string("[verify]\ncontrol = bang\n"), p),
        std::invalid_argument);

    CHECK(config_jet_field(RunConfig::parse_string(""), p) == "exact");
    ControlProblem anon = p;
    anon.exact_value = nullptr;
    CHECK(config_jet_field(RunConfig::parse_string(""), anon) == "solved");
    CHECK_THROWS_AS(
        config_jet_field(RunConfig::parse_string("[verify]\njet_field = exact\n"), anon),
        std::invalid_argument);
}

TEST_CASE("csv: field export has the contracted shape and is deterministic") {
    const auto p = builtin("martingale1d");
    const Grid g(v1(-1.0), v1(1.0), {5}, 3, p.horizon);
    const ValueField field = sample_field(g, p.exact_value);

    const std::string dir = "io_test_tmp";
    std::filesystem::create_directories(dir);
    write_field_csv(dir + "/field.csv", field);
    const std::string first = slurp(dir + "/field.csv");
    write_field_csv(dir + "/field.csv", field);
    CHECK(first == slurp(dir + "/field.csv"));

    std::istringstream is(first);
    std::string line;
    int rows = 0;
    std::getline(is, line);
    CHECK(line == "t,x1,v");
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 4 * 5);  // (time_steps + 1) * nodes
    std::filesystem::remove_all(dir);
}

TEST_CASE("manifest: stable bytes, hash of the config text") {
    const std::string dir = "io_test_manifest";
    write_manifest(dir, "solve", "abc", "7");
    const std::string first = slurp(dir + "/manifest.txt");
    write_manifest(dir, "solve", "abc", "7");
    CHECK(first == slurp(dir + "/manifest.txt"));
    CHECK(first.find("command=solve") != std::string::npos);
    CHECK(first.find("seed=7") != std::string::npos);
    CHECK(first.find("config_hash=") != std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST_CASE("report rows track the verification verdict inputs") {
    VerificationReport rep;
    rep.value_at_start = 0.7;
    rep.cost.mean = 0.71;
    rep.cost.stderr_ = 0.002;
    rep.optimality_gap = 0.01;
    rep.gap_integral_mean = 0.004;
    rep.gap_tolerance_used = 0.05;
    rep.value_tolerance_used = 0.05;
    rep.verdict = Verdict::CertifiedOptimal;
    const auto rows = report_rows(rep);
    CHECK(rows.size() >= 4);
    CHECK(rows[2].metric == "optimality_gap");
    CHECK(rows[2].pass);
    CHECK(report_text(rep).find("CERTIFIED_OPTIMAL") != std::string::npos);
}
