#pragma once

#include <map>
#include <optional>
#include <string>

#include "fbsc/grid.hpp"
#include "fbsc/model.hpp"
#include "fbsc/verify.hpp"

namespace fbsc {

/// Line-oriented `key = value` run configuration with [section] headers and
/// `#` comments. Unknown sections and keys are hard errors.
class RunConfig {
public:
    static RunConfig parse_file(const std::string& path);
    static RunConfig parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& section, const std::string& key) const;
    std::string get_string(const std::string& section, const std::string& key) const;
    double get_double(const std::string& section, const std::string& key) const;
    int get_int(const std::string& section, const std::string& key) const;
    std::uint64_t get_uint64(const std::string& section, const std::string& key) const;
    std::vector<double> get_doubles(const std::string& section, const std::string& key) const;

    /// Raw text as read, for manifest hashing.
    const std::string& text() const { return text_; }

private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
    std::string text_;
    std::string origin_;
};

struct ControlSpec {
    enum class Kind { Policy, Constant } kind = Kind::Policy;
    Vec constant;
};

/// Builders from the validated config. Each throws std::invalid_argument
/// with the offending section/key on bad input.
ControlProblem config_problem(const RunConfig& cfg);
Grid config_grid(const RunConfig& cfg, const ControlProblem& problem);
McRun config_mc(const RunConfig& cfg, std::optional<std::uint64_t> seed_override = {},
                std::optional<int> paths_override = {});
VerifyOptions config_verify_options(const RunConfig& cfg);
ControlSpec config_control(const RunConfig& cfg, const ControlProblem& problem);
std::pair<double, Vec> config_start(const RunConfig& cfg, const ControlProblem& problem);
std::string config_output_dir(const RunConfig& cfg);
/// Jet probes run against the builtin's exact value ("exact", default when
/// available) or the solved field ("solved").
std::string config_jet_field(const RunConfig& cfg, const ControlProblem& problem);

}  // namespace fbsc
