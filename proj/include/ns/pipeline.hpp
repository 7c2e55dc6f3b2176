#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ns/metrics.hpp"
#include "ns/model.hpp"
#include "ns/pseudolabel.hpp"

namespace ns {

enum class RunMode { kBaseline, kNoisyStudent, kFrameOracle, kNoRankerAblation };

RunMode parse_run_mode(const std::string& name);
std::string run_mode_name(RunMode mode);

ContrastPolicy parse_contrast_policy(const std::string& name);
std::string contrast_policy_name(ContrastPolicy policy);

struct ExperimentConfig {
  std::filesystem::path labeled_manifest;
  std::filesystem::path unlabeled_manifest;
  std::filesystem::path validation_manifest;
  std::filesystem::path test_manifest;
  TrainConfig teacher;
  TrainConfig student;
  RankerConfig ranker;
  int iterations = 1;
  RunMode mode = RunMode::kNoisyStudent;
  std::uint64_t master_seed = 0;
  int repeats = 1;  // baseline averaging protocol; > 1 only for baseline mode
};

void validate_experiment_config(const ExperimentConfig& cfg);

/// Parses a config document; relative manifest paths resolve against base_dir.
ExperimentConfig experiment_config_from_doc(const class KeyValueDoc& doc,
                                            const std::filesystem::path& base_dir);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct ModelEntry {
  std::string model_id;       // "teacher", "student_1", ...
  std::string checkpoint;     // relative to the run directory
  std::string pseudo_set;     // pseudo-label manifest used to train it, if any
  MetricsReport validation;
  MetricsReport test;
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct RunReport {
  std::vector<ModelEntry> entries;  // initial teacher plus one per iteration
  std::vector<std::pair<std::string, std::string>> config_echo;
  std::vector<StageTiming> timings;  // written to timings.txt, not report.txt
};

/// A stage failure wrapped with its stage name; partial artifacts under the
/// run directory are retained for inspection.
struct StageError : std::runtime_error {
  StageError(const std::string& stage_name, const std::string& what)
      : std::runtime_error("stage '" + stage_name + "' failed: " + what), stage(stage_name) {}
  std::string stage;
};

/// The five-step self-training loop: train teacher on the labeled seed, infer
/// the unlabeled corpus, rank + trinarize, train a noised student on the
/// labeled/pseudo mixture, repeat with the student as teacher. iterations=0
/// reduces to the baseline.
RunReport run_noisy_student(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

struct AblationRow {
  std::string name;
  MetricsReport test;
};

/// axis "ranker": with-ranker vs no-ranker self-training (2 rows);
/// axis "contrast": baseline under {none, power_law, log, all} (4 rows).
std::vector<AblationRow> run_ablation(const ExperimentConfig& cfg, const std::string& axis,
                                      const std::filesystem::path& out_dir);

/// report.txt is a pure function of (config, inputs); wall-clock timings go
/// to a separate timings.txt so reports stay byte-reproducible.
void save_run_report(const RunReport& report, const std::filesystem::path& out_dir);

}  // namespace ns
