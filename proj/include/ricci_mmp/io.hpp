#pragma once

#include <json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "ricci_mmp/density.hpp"
#include "ricci_mmp/elliptic.hpp"
#include "ricci_mmp/flow.hpp"
#include "ricci_mmp/mmp.hpp"
#include "ricci_mmp/sphere.hpp"
#include "ricci_mmp/toric.hpp"

namespace ricci_mmp {

using Json = nlohmann::json;

// Malformed or out-of-contract input (bad JSON, unknown field, wrong type,
// unreadable file). The CLI maps this to exit code 2.
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Strict object check: every required key present, no key outside allowed.
// `where` names the object in error messages ("scenario", "flow.config", ...).
void require_keys(const Json& j, const std::vector<std::string>& required,
                  const std::vector<std::string>& optional, const std::string& where);

// Fans serialize as { "rays": [[x, y], ...] }; divisors as ["p/q", ...] with
// exact rationals rendered canonically ("p" when the denominator is 1).
Json fan_to_json(const ToricSurfaceFan& fan);
ToricSurfaceFan fan_from_json(const Json& j);
Json divisor_to_json(const WeilDivisor& d);
WeilDivisor divisor_from_json(const Json& j);

std::string contraction_type_name(ContractionType t);
std::string terminal_state_name(TerminalState t);

// Trace: initial pair, then one entry per step with "lambda", "T" (exact
// "p/q" strings), "kind", "contracted_rays", and the successor pair when the
// step is not terminal.
Json trace_to_json(const MmpTrace& trace);
std::string render_trace_table(const MmpTrace& trace);

Json density_to_json(const DensitySpec& spec);
DensitySpec density_from_json(const Json& j);

// Flat binary field snapshot: 16-byte header (8-byte magic "RMMPFLD1",
// uint32 n, uint32 reserved zero), then n*n little-endian float64 row-major.
void write_field(const std::string& path, const ScalarField& f);
ScalarField read_field(const std::string& path);

// Full round-trip decimal formatting for every numeric CSV cell.
std::string format_full(double x);
std::string csv_table(const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows);

std::string flow_monitor_csv(const MonitorLog& log);
std::string sphere_monitor_csv(const SphereMonitorLog& log);
std::string stability_csv(const StabilityReport& report);

// All file writes go through a temp file in the target directory followed by
// a rename, so readers never observe partial output.
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);  // SchemaError if unreadable
Json load_json_file(const std::string& path);         // SchemaError on parse failure
void write_json_file(const std::string& path, const Json& j);

}  // namespace ricci_mmp
