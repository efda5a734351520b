#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "splatba/ba.hpp"
#include "splatba/experiment.hpp"
#include "splatba/harness.hpp"

namespace splatba::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kUsage = 2, kDiverged = 3 };

inline constexpr int kExperimentConfigVersion = 1;

/// One `ba` run. Relative paths resolve against the config file's directory.
struct ExperimentConfig {
  std::optional<SceneSpec> scene;                 // generate ground truth ...
  std::optional<std::filesystem::path> dataset;   // ... or load a saved sequence
  ExperimentSetup setup;
  bool perturb_seed_given = false;  // otherwise derived from `seed`
  BAConfig ba;
  std::vector<double> thresholds_deg{5.0, 10.0, 20.0};
  bool align_depth = true;
  std::filesystem::path output = "out";
  std::uint64_t seed = 0;
  int snapshot_every = 0;  // params snapshot cadence in steps, 0 = off
};

/// Strict: unknown fields, a wrong schema_version and unresolvable paths throw
/// ArgumentError.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

/// `key.sub=value`; value parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// Evaluation of a predicted sequence against ground truth. `source_frames`
/// maps prediction frame k to ground-truth frame; `roles` ("context" or
/// "target") selects image metrics (targets) and depth metrics (contexts) when
/// given. Throws ArgumentError on count mismatches.
struct EvalInputs {
  const GeneratedScene* pred = nullptr;
  const GeneratedScene* gt = nullptr;
  std::vector<int> source_frames;
  std::vector<std::string> roles;
  std::vector<double> thresholds_deg{5.0, 10.0, 20.0};
  bool align_depth = true;
};
nlohmann::json evaluate(const EvalInputs& in, std::vector<PoseErrorSample>* pairs = nullptr);

/// Entry point; returns the process exit code. Output goes to `out`/`err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace splatba::cli
