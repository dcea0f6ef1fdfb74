#pragma once

#include "driftlab/env.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace driftlab::cli {

using json = nlohmann::json;

/// Field descriptor: {"dims": [...], "half_values": [...]} or
/// {"dims": [...], "generator": {"kind": "uniform" | "mode" | "zero", ...}}.
DriftField parse_field(const json& descriptor);
json describe_field(const DriftField& b);

/// Command names, and the config keys each one accepts.
std::vector<std::string> command_names();
std::vector<std::string> command_keys(const std::string& command);

/// Checks keys and types for config["command"]. Throws ValidationError.
void validate_config(const json& config);

/// Runs one command and writes its artifact to `out` (or to config["output"]
/// when present). Library errors propagate.
void execute(const json& config, std::ostream& out);

/// execute() with errors mapped to exit codes 1/2/3 and a one-line tag on `err`.
int run(const json& config, std::ostream& out, std::ostream& err);

/// JSON text with every floating-point number printed as %.17g.
std::string dump_json(const json& value);

}  // namespace driftlab::cli
