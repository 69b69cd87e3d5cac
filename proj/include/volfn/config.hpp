#pragma once
#include <iosfwd>
#include <string>
#include <vector>

#include "volfn/mc.hpp"

namespace volfn {

// Flat INI-style config: [section] headers, key = value lines, full-line
// comments starting with '#' or ';'. Unknown sections or keys are errors
// (reported with line numbers), so typos cannot silently fall back to
// defaults.
struct ConfigFile {
    struct Entry {
        std::string key;
        std::string value;
        int line = 0;
    };
    struct Section {
        std::string name;
        std::vector<Entry> entries;
        int line = 0;
    };
    std::vector<Section> sections;
    std::string label; // file name for error messages

    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse(std::istream& in, const std::string& label);

    const Section* find(const std::string& name) const;
};

// Section binders. Missing sections yield defaults where the spec has them;
// [model] requires at least a kind.
ModelSpec model_from_config(const ConfigFile& cfg);
TuningPlan plan_from_config(const ConfigFile& cfg);
ExperimentSpec experiment_from_config(const ConfigFile& cfg);

// Truth sidecar for a simulated path: flat key=value with indexed entries for
// per-function truths and a jump section when jumps are present.
void write_truth_sidecar(const SimulatedPath& path, const std::vector<std::string>& function_names,
                         std::ostream& out);

} // namespace volfn
