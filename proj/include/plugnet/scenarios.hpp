#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plugnet/attacks.hpp"

namespace plugnet {

struct ScenarioConfig {
  std::string name;
  std::uint64_t seed = 0;
  bool patched = false;
  VendorOui vendor_oui{0xEC, 0x1A, 0x59};  // Belkin block
  std::string output_dir;
  double entropy_threshold = 7.0;
  std::size_t entropy_min_len = 32;
};

const std::vector<std::string>& scenario_names();
bool is_known_scenario(const std::string& name);

struct ScenarioRun {
  bool ok = false;
  std::string outcome;   // "Passed" for benign scripts, attack kind otherwise
  std::string failure;   // first postcondition that did not hold
  std::vector<std::uint64_t> evidence;
  std::string trace_jsonl;
  std::string report_json;
  std::string final_states_json;
};

// Builds the topology for the named scenario, drives it to completion and
// self-verifies its postconditions. Throws Error on an unknown name.
ScenarioRun run_scenario(const ScenarioConfig& config);

// trace.jsonl, report.json and final_states.json under output_dir (created if
// missing).
void write_artifacts(const ScenarioRun& run, const std::string& output_dir);

}  // namespace plugnet
