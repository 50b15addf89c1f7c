#pragma once

#include <string>

#include "fbsc/fbsde.hpp"
#include "fbsc/grid.hpp"
#include "fbsc/subdiff.hpp"
#include "fbsc/verify.hpp"

namespace fbsc {

/// CSV writers: header row, '.' decimal separator, ',' delimiter, %.17g
/// values, fixed row order. Outputs are byte-identical across runs for the
/// same inputs.
void write_field_csv(const std::string& path, const ValueField& field);
void write_policy_csv(const std::string& path, const FeedbackPolicy& policy);
void write_bundle_csv(const std::string& path, const PathBundle& bundle);

struct ReportRow {
    std::string metric;
    double value = 0.0;
    double stderr_ = 0.0;
    double tolerance = 0.0;
    bool pass = true;
};
void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows);

struct JetRow {
    JetCandidate jet;
    bool accept = false;
    double worst_ratio = 0.0;
};
void write_jets_csv(const std::string& path, const std::vector<JetRow>& rows, int dim);

/// Report rows for a verification outcome, shared by the CSV and text forms.
std::vector<ReportRow> report_rows(const VerificationReport& rep);
std::string report_text(const VerificationReport& rep);

/// manifest.txt with the config hash, seed and version; no timestamps, so
/// identical runs produce identical bytes.
void write_manifest(const std::string& dir, const std::string& command,
                    const std::string& config_text, const std::string& seed);

}  // namespace fbsc
