#include "fbsc/io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fbsc {

namespace {

std::ofstream open_out(const std::string& path) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("io: cannot write '" + path + "'");
    return out;
}

}  // namespace

void write_field_csv(const std::string& path, const ValueField& field) {
    auto out = open_out(path);
    const Grid& g = field.grid();
    out << "t";
    for (int i = 0; i < g.dim(); ++i) out << ",x" << (i + 1);
    out << ",v\n";
    for (int k = 0; k <= g.time_steps(); ++k) {
        const std::string t = format_double(g.time(k));
        for (std::size_t j = 0; j < g.node_count(); ++j) {
            out << t;
            const Vec x = g.node(j);
            for (int i = 0; i < g.dim(); ++i) out << ',' << format_double(x[i]);
            out << ',' << format_double(field.at(k, j)) << '\n';
        }
    }
}

void write_policy_csv(const std::string& path, const FeedbackPolicy& policy) {
    auto out = open_out(path);
    const Grid& g = policy.grid();
    out << "t";
    for (int i = 0; i < g.dim(); ++i) out << ",x" << (i + 1);
    for (int i = 0; i < policy.controls().dim(); ++i) out << ",u" << (i + 1);
    out << '\n';
    for (int k = 0; k <= g.time_steps(); ++k) {
        const std::string t = format_double(g.time(k));
        for (std::size_t j = 0; j < g.node_count(); ++j) {
            out << t;
            const Vec x = g.node(j);
            for (int i = 0; i < g.dim(); ++i) out << ',' << format_double(x[i]);
            const Vec& u = policy.control_at(k, j);
            for (int i = 0; i < u.size(); ++i) out << ',' << format_double(u[i]);
            out << '\n';
        }
    }
}

void write_bundle_csv(const std::string& path, const PathBundle& b) {
    auto out = open_out(path);
    out << "k,t,meanX,meanY,meanZ,stderrY\n";
    for (int k = 0; k <= b.steps; ++k) {
        double mx = 0.0, my = 0.0, mz = 0.0, ssy = 0.0;
        for (int p = 0; p < b.paths; ++p) {
            mx += b.xval(p, k, 0);
            if (b.backward_done) {
                my += b.yval(p, k);
                if (k < b.steps) mz += b.zval(p, k, 0);
            }
        }
        mx /= b.paths;
        my /= b.paths;
        mz /= b.paths;
        if (b.backward_done && b.paths > 1) {
            for (int p = 0; p < b.paths; ++p) {
                const double d = b.yval(p, k) - my;
                ssy += d * d;
            }
            ssy = std::sqrt(ssy / (b.paths - 1)) / std::sqrt(static_cast<double>(b.paths));
        }
        out << k << ',' << format_double(b.time(k)) << ',' << format_double(mx) << ','
            << format_double(my) << ',' << format_double(mz) << ',' << format_double(ssy)
            << '\n';
    }
}

void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows) {
    auto out = open_out(path);
    out << "metric,value,stderr,tolerance,pass\n";
    for (const auto& r : rows)
        out << r.metric << ',' << format_double(r.value) << ',' << format_double(r.stderr_)
            << ',' << format_double(r.tolerance) << ',' << (r.pass ? "true" : "false")
            << '\n';
}

void write_jets_csv(const std::string& path, const std::vector<JetRow>& rows, int dim) {
    auto out = open_out(path);
    out << "p";
    for (int i = 0; i < dim; ++i) out << ",q" << (i + 1);
    for (int i = 0; i < dim; ++i)
        for (int l = 0; l < dim; ++l) out << ",theta" << (i + 1) << (l + 1);
    out << ",accept,worst_ratio\n";
    for (const auto& r : rows) {
        out << format_double(r.jet.p);
        for (int i = 0; i < dim; ++i) out << ',' << format_double(r.jet.q[i]);
        for (int i = 0; i < dim; ++i)
            for (int l = 0; l < dim; ++l) out << ',' << format_double(r.jet.theta(i, l));
        out << ',' << (r.accept ? "true" : "false") << ',' << format_double(r.worst_ratio)
            << '\n';
    }
}

std::vector<ReportRow> report_rows(const VerificationReport& rep) {
    const double value_tol = 3.0 * rep.cost.stderr_ + rep.value_tolerance_used;
    std::vector<ReportRow> rows;
    rows.push_back({"value_at_start", rep.value_at_start, 0.0, 0.0, true});
    rows.push_back({"cost_estimate", rep.cost.mean, rep.cost.stderr_, 0.0, true});
    rows.push_back({"optimality_gap", rep.optimality_gap, rep.cost.stderr_, value_tol,
                    std::abs(rep.optimality_gap) <= value_tol});
    rows.push_back({"hamiltonian_gap_integral", rep.gap_integral_mean,
                    rep.gap_integral_stderr, rep.gap_tolerance_used,
                    rep.gap_integral_mean <= rep.gap_tolerance_used});
    rows.push_back({"pointwise_violations", static_cast<double>(rep.pointwise_violations),
                    0.0, 0.0, rep.pointwise_violations == 0});
    rows.push_back({"worst_pointwise", rep.worst_pointwise, 0.0, 0.0, true});
    rows.push_back({"field_residual", rep.field_residual, 0.0, 0.0, true});
    rows.push_back({"escaped_fraction", rep.escaped_fraction, 0.0, 0.0, true});
    rows.push_back({"skipped_fraction", rep.skipped_fraction, 0.0, 0.0, true});
    return rows;
}

std::string report_text(const VerificationReport& rep) {
    std::ostringstream os;
    os << "verdict: " << to_string(rep.verdict) << '\n'
       << "  value_at_start          " << format_double(rep.value_at_start) << '\n'
       << "  cost_estimate           " << format_double(rep.cost.mean) << " +/- "
       << format_double(rep.cost.stderr_) << " (stderr)\n"
       << "  optimality_gap          " << format_double(rep.optimality_gap)
       << "  (tolerance 3*stderr + " << format_double(rep.value_tolerance_used) << ")\n"
       << "  hamiltonian_gap_integral " << format_double(rep.gap_integral_mean) << " +/- "
       << format_double(rep.gap_integral_stderr) << "  (tolerance "
       << format_double(rep.gap_tolerance_used) << ")\n"
       << "  pointwise_violations    " << rep.pointwise_violations << " (worst "
       << format_double(rep.worst_pointwise) << ")\n"
       << "  field_residual          " << format_double(rep.field_residual) << '\n'
       << "  escaped_fraction        " << format_double(rep.escaped_fraction) << '\n'
       << "  skipped_fraction        " << format_double(rep.skipped_fraction) << '\n'
       << "  detail: " << rep.detail << '\n';
    return os.str();
}

void write_manifest(const std::string& dir, const std::string& command,
                    const std::string& config_text, const std::string& seed) {
    std::filesystem::create_directories(dir);
    auto out = open_out(dir + "/manifest.txt");
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(config_text)));
    out << "command=" << command << " config_hash=" << hash << " seed=" << seed
        << " version=" << kVersion << '\n';
}

}  // namespace fbsc
