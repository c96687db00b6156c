#pragma once

#include <string>
#include <vector>

#include "ricci_mmp/io.hpp"

namespace ricci_mmp {

struct RunOptions {
    std::string out_dir = ".";
    // Parallel width for independent sweep members (pairs, grid refinements,
    // perturbation runs). Engines themselves stay sequential, so results do
    // not depend on the width.
    int jobs = 1;
    // Directory holding the bundled scenario files; suite scenarios resolve
    // their members against it.
    std::string scenario_dir;
};

// Clamps a requested width by RICCI_MMP_THREADS (when set) and the hardware
// concurrency; never below 1.
int resolve_jobs(int requested);

// Strict parsers for the scenario config sub-objects (SchemaError on any
// unknown field, wrong type, or out-of-contract value). Shared by the CLI
// runner and the python bindings.
FlowConfig flow_config_from_json(const Json& j);
SphereConfig sphere_config_from_json(const Json& j);

struct ScenarioReport {
    std::string name;
    std::string kind;
    std::string paper_ref;
    bool checks_passed = false;
    std::vector<std::string> notes;  // one line per check, PASS/FAIL prefixed
    Json details;                    // measured quantities, echoed in the summary artifact
};

// Parses and runs one scenario document, writing artifacts (summary JSON plus
// task-specific CSV / JSON / field files) into opt.out_dir. Throws
// SchemaError on contract violations; engine errors propagate as their own
// exception types.
ScenarioReport execute_scenario(const Json& doc, const RunOptions& opt);

// File front end with the exit-code contract: 0 when every check passed,
// 1 on a failed check or an engine error (diagnostic JSON written), 2 on an
// input error. Check lines go to stdout, errors to stderr.
int run_scenario_file(const std::string& path, const RunOptions& opt);

// Schema validation without execution: 0 valid, 2 invalid (reason on stderr).
int validate_scenario_file(const std::string& path);

// Runs a registered suite by name under the same exit-code contract; the
// suite's member files resolve against opt.scenario_dir.
bool is_suite_name(const std::string& name);
int run_suite_by_name(const std::string& name, const RunOptions& opt);

struct SuiteInfo {
    std::string name;     // stable command name, e.g. "thmA1_volume_band"
    std::string result;   // identifier of the result the suite checks
    std::string summary;
    std::vector<std::string> scenario_files;  // bundled scenario basenames
};

// Fixed registry in stable order; the names are part of the CLI contract.
const std::vector<SuiteInfo>& suite_registry();
std::string render_suites_table();

}  // namespace ricci_mmp
