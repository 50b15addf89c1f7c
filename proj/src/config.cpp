#include "fbsc/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace fbsc {

namespace {

const std::map<std::string, std::set<std::string>> kSchema = {
    {"problem",
     {"name", "kind", "horizon", "control_lo", "control_hi", "control_points", "b",
      "sigma", "f", "phi", "lipschitz"}},
    {"grid", {"lo", "hi", "nodes", "time_steps", "cfl", "trust_margin"}},
    {"mc", {"paths", "dt", "seed", "basis", "cells_per_axis", "poly_degree"}},
    {"verify",
     {"control", "start", "gap_tolerance", "value_tolerance", "residual_tolerance",
      "tie_tolerance", "escape_fraction", "sample_points", "jet_field"}},
    {"output", {"dir", "formats"}},
};

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& what) {
    std::ostringstream os;
    os << "config error (" << origin << ":" << line << "): " << what;
    throw std::invalid_argument(os.str());
}

std::vector<double> parse_doubles(const std::string& value, const std::string& where) {
    std::istringstream is(value);
    std::vector<double> out;
    std::string tok;
    while (is >> tok) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw std::invalid_argument("config: key '" + where + "' has non-numeric token '" +
                                        tok + "'");
        }
    }
    if (out.empty())
        throw std::invalid_argument("config: key '" + where + "' has no numeric values");
    return out;
}

}  // namespace

RunConfig RunConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
}

RunConfig RunConfig::parse_string(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    cfg.text_ = text;
    cfg.origin_ = origin;

    std::istringstream in(text);
    std::string raw;
    std::string section;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') fail(origin, lineno, "malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (!kSchema.count(section))
                fail(origin, lineno, "unknown section [" + section + "]");
            cfg.sections_[section];
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(origin, lineno, "expected 'key = value'");
        if (section.empty()) fail(origin, lineno, "key outside any [section]");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!kSchema.at(section).count(key))
            fail(origin, lineno, "unknown key '" + key + "' in section [" + section + "]");
        if (value.empty()) fail(origin, lineno, "empty value for key '" + key + "'");
        if (cfg.sections_[section].count(key))
            fail(origin, lineno, "duplicate key '" + key + "' in section [" + section + "]");
        cfg.sections_[section][key] = value;
    }
    return cfg;
}

bool RunConfig::has(const std::string& section, const std::string& key) const {
    const auto it = sections_.find(section);
    return it != sections_.end() && it->second.count(key) > 0;
}

std::string RunConfig::get_string(const std::string& section, const std::string& key) const {
    if (!has(section, key))
        throw std::invalid_argument("config: missing key '" + key + "' in section [" +
                                    section + "]");
    return sections_.at(section).at(key);
}

double RunConfig::get_double(const std::string& section, const std::string& key) const {
    const auto v = parse_doubles(get_string(section, key), section + "." + key);
    if (v.size() != 1)
        throw std::invalid_argument("config: key '" + section + "." + key +
                                    "' expects a single number");
    return v[0];
}

int RunConfig::get_int(const std::string& section, const std::string& key) const {
    const double d = get_double(section, key);
    const int i = static_cast<int>(d);
    if (static_cast<double>(i) != d)
        throw std::invalid_argument("config: key '" + section + "." + key +
                                    "' expects an integer");
    return i;
}

std::uint64_t RunConfig::get_uint64(const std::string& section, const std::string& key) const {
    const std::string s = get_string(section, key);
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + section + "." + key +
                                    "' expects a nonnegative integer");
    }
}

std::vector<double> RunConfig::get_doubles(const std::string& section,
                                           const std::string& key) const {
    return parse_doubles(get_string(section, key), section + "." + key);
}

namespace {

Vec to_vec(const std::vector<double>& v) {
    Vec out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i];
    return out;
}

ControlProblem custom_problem(const RunConfig& cfg) {
    // 1-d polynomial coefficient tables; see the README for the grammar.
    const std::vector<double> b = cfg.get_doubles("problem", "b");
    const std::vector<double> sg = cfg.get_doubles("problem", "sigma");
    const std::vector<double> f = cfg.get_doubles("problem", "f");
    const std::vector<double> phi = cfg.get_doubles("problem", "phi");
    if (b.size() != 3)
        throw std::invalid_argument("config: problem.b expects 3 coefficients (c0 cx cu)");
    if (sg.size() != 3)
        throw std::invalid_argument("config: problem.sigma expects 3 coefficients (c0 cx cu)");
    if (f.size() != 7)
        throw std::invalid_argument(
            "config: problem.f expects 7 coefficients (c0 cx cxx cy cz cu cuu)");
    if (phi.size() != 3)
        throw std::invalid_argument("config: problem.phi expects 3 coefficients (c0 cx cxx)");

    ControlProblem p;
    p.name = "custom";
    p.state_dim = 1;
    p.control_dim = 1;
    p.horizon = cfg.get_double("problem", "horizon");
    p.drift = [b](double, const Vec& x, const Vec& u) {
        Vec out(1);
        out[0] = b[0] + b[1] * x[0] + b[2] * u[0];
        return out;
    };
    p.diffusion = [sg](double, const Vec& x, const Vec& u) {
        Mat out(1, 1);
        out(0, 0) = sg[0] + sg[1] * x[0] + sg[2] * u[0];
        return out;
    };
    p.generator = [f](double, const Vec& x, double y, const Vec& z, const Vec& u) {
        return f[0] + f[1] * x[0] + f[2] * x[0] * x[0] + f[3] * y + f[4] * z[0] +
               f[5] * u[0] + f[6] * u[0] * u[0];
    };
    p.terminal = [phi](const Vec& x) { return phi[0] + phi[1] * x[0] + phi[2] * x[0] * x[0]; };
    if (cfg.has("problem", "lipschitz"))
        p.lipschitz_bound = cfg.get_double("problem", "lipschitz");
    return p;
}

}  // namespace

ControlProblem config_problem(const RunConfig& cfg) {
    const bool is_builtin = cfg.has("problem", "name");
    const bool is_custom =
        cfg.has("problem", "kind") && cfg.get_string("problem", "kind") == "custom";
    if (cfg.has("problem", "kind") && !is_custom)
        throw std::invalid_argument("config: problem.kind must be 'custom'");
    if (is_builtin == is_custom)
        throw std::invalid_argument(
            "config: section [problem] needs exactly one of 'name' or 'kind = custom'");

    ControlProblem p;
    if (is_builtin) {
        const std::string name = cfg.get_string("problem", "name");
        p = cfg.has("problem", "horizon")
                ? builtin(name, cfg.get_double("problem", "horizon"))
                : builtin(name);
    } else {
        p = custom_problem(cfg);
    }

    const bool has_lo = cfg.has("problem", "control_lo");
    const bool has_hi = cfg.has("problem", "control_hi");
    const bool has_n = cfg.has("problem", "control_points");
    if (has_lo != has_hi || has_lo != has_n) {
        if (!(is_builtin && !has_lo))
            throw std::invalid_argument(
                "config: control_lo, control_hi and control_points must be given together");
    }
    if (has_lo) {
        const Vec lo = to_vec(cfg.get_doubles("problem", "control_lo"));
        const Vec hi = to_vec(cfg.get_doubles("problem", "control_hi"));
        p.control_set = ControlSet::lattice(lo, hi, cfg.get_int("problem", "control_points"));
        p.control_dim = p.control_set.dim();
    } else if (is_custom) {
        throw std::invalid_argument("config: custom problems require the control box keys");
    }
    p.validate();
    return p;
}

Grid config_grid(const RunConfig& cfg, const ControlProblem& problem) {
    const Vec lo = to_vec(cfg.get_doubles("grid", "lo"));
    const Vec hi = to_vec(cfg.get_doubles("grid", "hi"));
    const std::vector<double> nodes_d = cfg.get_doubles("grid", "nodes");
    std::vector<int> nodes(nodes_d.size());
    for (std::size_t i = 0; i < nodes_d.size(); ++i) nodes[i] = static_cast<int>(nodes_d[i]);
    const double margin =
        cfg.has("grid", "trust_margin") ? cfg.get_double("grid", "trust_margin") : 0.15;

    const bool has_steps = cfg.has("grid", "time_steps");
    const bool has_cfl = cfg.has("grid", "cfl");
    if (has_steps == has_cfl)
        throw std::invalid_argument(
            "config: section [grid] needs exactly one of 'time_steps' or 'cfl = auto'");
    int steps;
    if (has_cfl) {
        if (cfg.get_string("grid", "cfl") != "auto")
            throw std::invalid_argument("config: grid.cfl only supports 'auto'");
        steps = cfl_time_steps(problem, lo, hi, nodes);
    } else {
        steps = cfg.get_int("grid", "time_steps");
    }
    return Grid(lo, hi, nodes, steps, problem.horizon, margin);
}

McRun config_mc(const RunConfig& cfg, std::optional<std::uint64_t> seed_override,
                std::optional<int> paths_override) {
    McRun mc;
    mc.paths = paths_override ? *paths_override : cfg.get_int("mc", "paths");
    mc.dt = cfg.get_double("mc", "dt");
    if (seed_override)
        mc.seed = *seed_override;
    else if (cfg.has("mc", "seed"))
        mc.seed = cfg.get_uint64("mc", "seed");
    else
        throw std::invalid_argument(
            "config: mc.seed is required for Monte Carlo runs (or pass --seed)");
    if (mc.paths < 1) throw std::invalid_argument("config: mc.paths must be >= 1");
    if (!(mc.dt > 0.0)) throw std::invalid_argument("config: mc.dt must be > 0");
    if (cfg.has("mc", "basis")) {
        const std::string basis = cfg.get_string("mc", "basis");
        if (basis == "cells")
            mc.regression.basis = RegressionOptions::Basis::Cells;
        else if (basis == "poly")
            mc.regression.basis = RegressionOptions::Basis::Poly;
        else
            throw std::invalid_argument("config: mc.basis must be 'cells' or 'poly'");
    }
    if (cfg.has("mc", "cells_per_axis"))
        mc.regression.cells_per_axis = cfg.get_int("mc", "cells_per_axis");
    if (cfg.has("mc", "poly_degree"))
        mc.regression.poly_degree = cfg.get_int("mc", "poly_degree");
    return mc;
}

VerifyOptions config_verify_options(const RunConfig& cfg) {
    VerifyOptions opt;
    if (cfg.has("verify", "gap_tolerance"))
        opt.gap_tolerance = cfg.get_double("verify", "gap_tolerance");
    if (cfg.has("verify", "value_tolerance"))
        opt.value_tolerance = cfg.get_double("verify", "value_tolerance");
    if (cfg.has("verify", "residual_tolerance"))
        opt.residual_tolerance = cfg.get_double("verify", "residual_tolerance");
    if (cfg.has("verify", "tie_tolerance"))
        opt.tie_tolerance = cfg.get_double("verify", "tie_tolerance");
    if (cfg.has("verify", "escape_fraction"))
        opt.escape_fraction = cfg.get_double("verify", "escape_fraction");
    return opt;
}

ControlSpec config_control(const RunConfig& cfg, const ControlProblem& problem) {
    ControlSpec spec;
    if (!cfg.has("verify", "control")) return spec;  // defaults to the synthesized policy
    const std::string raw = cfg.get_string("verify", "control");
    std::istringstream is(raw);
    std::string kind;
    is >> kind;
    if (kind == "policy") {
        spec.kind = ControlSpec::Kind::Policy;
        return spec;
    }
    if (kind == "constant") {
        std::vector<double> vals;
        double v;
        while (is >> v) vals.push_back(v);
        if (static_cast<int>(vals.size()) != problem.control_dim)
            throw std::invalid_argument(
                "config: verify.control constant needs one value per control dimension");
        spec.kind = ControlSpec::Kind::Constant;
        spec.constant = to_vec(vals);
        return spec;
    }
    throw std::invalid_argument("config: verify.control must be 'policy' or 'constant <u...>'");
}

std::pair<double, Vec> config_start(const RunConfig& cfg, const ControlProblem& problem) {
    if (!cfg.has("verify", "start"))
        return {0.0, Vec::Zero(problem.state_dim)};
    const std::vector<double> vals = cfg.get_doubles("verify", "start");
    if (static_cast<int>(vals.size()) != problem.state_dim + 1)
        throw std::invalid_argument("config: verify.start expects 's y1 .. yd'");
    Vec y(problem.state_dim);
    for (int i = 0; i < problem.state_dim; ++i) y[i] = vals[i + 1];
    return {vals[0], y};
}

std::string config_output_dir(const RunConfig& cfg) {
    if (cfg.has("output", "formats") && cfg.get_string("output", "formats") != "csv")
        throw std::invalid_argument("config: output.formats only supports 'csv'");
    return cfg.has("output", "dir") ? cfg.get_string("output", "dir") : "out";
}

std::string config_jet_field(const RunConfig& cfg, const ControlProblem& problem) {
    if (cfg.has("verify", "jet_field")) {
        const std::string v = cfg.get_string("verify", "jet_field");
        if (v != "exact" && v != "solved")
            throw std::invalid_argument("config: verify.jet_field must be 'exact' or 'solved'");
        if (v == "exact" && !problem.exact_value)
            throw std::invalid_argument(
                "config: verify.jet_field = exact needs a problem with a closed form");
        return v;
    }
    return problem.exact_value ? "exact" : "solved";
}

}  // namespace fbsc
