#include "ns/pipeline.hpp"

#include <chrono>
#include <cmath>

#include "ns/textio.hpp"

namespace ns {
namespace {

class StageClock {
 public:
  explicit StageClock(RunReport& report) : report_(report) {}

  template <typename Fn>
  auto run(const std::string& stage, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(fn())>) {
        fn();
        record(stage, start);
      } else {
        auto result = fn();
        record(stage, start);
        return result;
      }
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(stage, e.what());
    }
  }

 private:
  void record(const std::string& stage, std::chrono::steady_clock::time_point start) {
    const auto elapsed = std::chrono::steady_clock::now() - start;
    report_.timings.push_back(
        {stage, std::chrono::duration_cast<std::chrono::duration<double>>(elapsed).count()});
  }

  RunReport& report_;
};

TrainConfig train_config_from_doc(const KeyValueDoc& doc, const std::string& prefix) {
  TrainConfig cfg;
  cfg.epochs = static_cast<int>(doc.get_int(prefix + ".epochs"));
  cfg.batch_size = static_cast<int>(doc.get_int(prefix + ".batch_size"));
  cfg.crop_size = static_cast<int>(doc.get_int(prefix + ".crop_size"));
  cfg.learning_rate = doc.get_double(prefix + ".learning_rate");
  cfg.momentum = doc.get_double(prefix + ".momentum");
  cfg.mix_ratio_labeled = doc.get_double(prefix + ".mix_ratio_labeled");
  cfg.contrast_policy = parse_contrast_policy(doc.get_or(prefix + ".contrast", "all"));
  validate_train_config(cfg);
  return cfg;
}

void echo_train_config(const TrainConfig& cfg, const std::string& prefix,
                       std::vector<std::pair<std::string, std::string>>& echo) {
  echo.emplace_back(prefix + ".epochs", std::to_string(cfg.epochs));
  echo.emplace_back(prefix + ".batch_size", std::to_string(cfg.batch_size));
  echo.emplace_back(prefix + ".crop_size", std::to_string(cfg.crop_size));
  echo.emplace_back(prefix + ".learning_rate", format_double(cfg.learning_rate));
  echo.emplace_back(prefix + ".momentum", format_double(cfg.momentum));
  echo.emplace_back(prefix + ".mix_ratio_labeled", format_double(cfg.mix_ratio_labeled));
  echo.emplace_back(prefix + ".contrast", contrast_policy_name(cfg.contrast_policy));
}

void echo_metrics(const MetricsReport& report, const std::string& prefix,
                  std::vector<std::pair<std::string, std::string>>& out) {
  out.emplace_back(prefix + ".dataset_id", report.dataset_id);
  out.emplace_back(prefix + ".pixel_ap", format_double(report.pixel_ap));
  out.emplace_back(prefix + ".frame_ap", format_double(report.frame_ap));
  out.emplace_back(prefix + ".stack_ap", format_double(report.stack_ap));
  out.emplace_back(prefix + ".stack_roc_auc", format_double(report.stack_roc_auc));
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw StorageError("cannot create directory: " + dir.string());
}

}  // namespace

RunMode parse_run_mode(const std::string& name) {
  if (name == "baseline") return RunMode::kBaseline;
  if (name == "noisy_student") return RunMode::kNoisyStudent;
  if (name == "frame_oracle") return RunMode::kFrameOracle;
  if (name == "no_ranker_ablation") return RunMode::kNoRankerAblation;
  throw ParameterError("unknown mode: " + name);
}

std::string run_mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::kBaseline: return "baseline";
    case RunMode::kNoisyStudent: return "noisy_student";
    case RunMode::kFrameOracle: return "frame_oracle";
    case RunMode::kNoRankerAblation: return "no_ranker_ablation";
  }
  throw ParameterError("invalid mode enum");
}

ContrastPolicy parse_contrast_policy(const std::string& name) {
  if (name == "all") return ContrastPolicy::kAll;
  if (name == "none") return ContrastPolicy::kNone;
  if (name == "power_law") return ContrastPolicy::kPowerOnly;
  if (name == "log") return ContrastPolicy::kLogOnly;
  throw ParameterError("unknown contrast policy: " + name);
}

std::string contrast_policy_name(ContrastPolicy policy) {
  switch (policy) {
    case ContrastPolicy::kAll: return "all";
    case ContrastPolicy::kNone: return "none";
    case ContrastPolicy::kPowerOnly: return "power_law";
    case ContrastPolicy::kLogOnly: return "log";
  }
  throw ParameterError("invalid contrast policy enum");
}

void validate_experiment_config(const ExperimentConfig& cfg) {
  if (cfg.iterations < 0) throw ParameterError("iterations must be >= 0");
  if (cfg.repeats < 1) throw ParameterError("repeats must be >= 1");
  if (cfg.repeats > 1 && cfg.mode != RunMode::kBaseline)
    throw ParameterError("repeats > 1 is only supported in baseline mode");
  validate_train_config(cfg.teacher);
  validate_train_config(cfg.student);
  validate_ranker_config(cfg.ranker);
  for (const auto* p : {&cfg.labeled_manifest, &cfg.validation_manifest, &cfg.test_manifest}) {
    if (!std::filesystem::exists(*p))
      throw ParameterError("manifest does not exist: " + p->string());
  }
  const bool needs_corpus = cfg.mode == RunMode::kFrameOracle ||
                            (cfg.mode != RunMode::kBaseline && cfg.iterations > 0);
  if (needs_corpus && !std::filesystem::exists(cfg.unlabeled_manifest))
    throw ParameterError("manifest does not exist: " + cfg.unlabeled_manifest.string());
}

ExperimentConfig experiment_config_from_doc(const KeyValueDoc& doc,
                                            const std::filesystem::path& base_dir) {
  auto resolve = [&](const std::string& key) -> std::filesystem::path {
    if (!doc.has(key)) return {};
    std::filesystem::path p = doc.get(key);
    return p.is_absolute() ? p : base_dir / p;
  };

  ExperimentConfig cfg;
  cfg.labeled_manifest = resolve("labeled_manifest");
  cfg.unlabeled_manifest = resolve("unlabeled_manifest");
  cfg.validation_manifest = resolve("validation_manifest");
  cfg.test_manifest = resolve("test_manifest");
  cfg.teacher = train_config_from_doc(doc, "teacher");
  cfg.student = train_config_from_doc(doc, "student");
  cfg.ranker.percentile_c = doc.get_double("ranker.percentile_c");
  cfg.ranker.k_pos = doc.get_double("ranker.k_pos");
  cfg.ranker.k_neg = doc.get_double("ranker.k_neg");
  cfg.iterations = static_cast<int>(doc.get_int("iterations"));
  cfg.mode = parse_run_mode(doc.get_or("mode", "noisy_student"));
  cfg.master_seed = doc.get_u64("master_seed");
  cfg.repeats = static_cast<int>(doc.has("repeats") ? doc.get_int("repeats") : 1);
  validate_experiment_config(cfg);
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return experiment_config_from_doc(KeyValueDoc::load(path), path.parent_path());
}

namespace {

void echo_config(const ExperimentConfig& cfg, RunReport& report) {
  auto& echo = report.config_echo;
  // iterations=0 is the definition of the baseline; echo the effective mode so
  // baseline and zero-iteration self-training reports compare byte-identical.
  const RunMode effective =
      (cfg.mode == RunMode::kNoisyStudent && cfg.iterations == 0) ? RunMode::kBaseline : cfg.mode;
  echo.emplace_back("mode", run_mode_name(effective));
  echo.emplace_back("iterations",
                    std::to_string(effective == RunMode::kBaseline ? 0 : cfg.iterations));
  echo.emplace_back("master_seed", std::to_string(cfg.master_seed));
  echo.emplace_back("repeats", std::to_string(cfg.repeats));
  echo.emplace_back("ranker.percentile_c", format_double(cfg.ranker.percentile_c));
  echo.emplace_back("ranker.k_pos", format_double(cfg.ranker.k_pos));
  echo.emplace_back("ranker.k_neg", format_double(cfg.ranker.k_neg));
  echo_train_config(cfg.teacher, "teacher", echo);
  echo_train_config(cfg.student, "student", echo);
  // Pseudo-labels are regenerated on the full corpus at every iteration.
  echo.emplace_back("pseudolabels_per_iteration", "regenerated");
}

/// Trains one model on the labeled seed only (step 1 of the loop).
TinyFCN train_seed_model(const ExperimentConfig& cfg, const TrainingSet& labeled,
                         const std::string& stream_tag) {
  TinyFCN model = make_tiny_fcn(derive_stream_seed(cfg.master_seed, "init/" + stream_tag));
  TrainConfig tc = cfg.teacher;
  tc.seed = derive_stream_seed(cfg.master_seed, "train/" + stream_tag);
  tc.mix_ratio_labeled = 1.0;
  train(model, labeled, nullptr, tc);
  return model;
}

void evaluate_entry(const TinyFCN& model, const ExperimentConfig& cfg, ModelEntry& entry) {
  entry.validation =
      evaluate_model(model, load_manifest(cfg.validation_manifest), entry.model_id);
  entry.test = evaluate_model(model, load_manifest(cfg.test_manifest), entry.model_id);
}

}  // namespace

RunReport run_noisy_student(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  validate_experiment_config(cfg);
  ensure_dir(out_dir);

  RunReport report;
  echo_config(cfg, report);
  StageClock clock(report);

  const DatasetManifest labeled_manifest =
      clock.run("load_labeled", [&] { return load_manifest(cfg.labeled_manifest); });
  const TrainingSet labeled =
      clock.run("load_labeled", [&] { return load_training_set(labeled_manifest); });
  if (labeled.empty()) throw StageError("load_labeled", "labeled manifest is empty");

  const int iterations = cfg.mode == RunMode::kBaseline ? 0 : cfg.iterations;
  const bool apply_ranker = cfg.mode != RunMode::kNoRankerAblation;

  // Step 1: teacher on the labeled seed only. Baseline repeats use their own
  // streams; the first repeat is the canonical teacher.
  std::vector<TinyFCN> teachers;
  for (int rep = 0; rep < cfg.repeats; ++rep) {
    const std::string tag = rep == 0 ? "teacher" : "teacher_rep" + std::to_string(rep + 1);
    TinyFCN model = clock.run("train_teacher", [&] { return train_seed_model(cfg, labeled, tag); });

    ModelEntry entry;
    entry.model_id = tag;
    entry.checkpoint = tag + ".nsc";
    clock.run("save_teacher", [&] { save_checkpoint(model, cfg.teacher, out_dir / entry.checkpoint); });
    clock.run("evaluate_teacher", [&] { evaluate_entry(model, cfg, entry); });
    report.entries.push_back(std::move(entry));
    teachers.push_back(std::move(model));
  }
  TinyFCN teacher = std::move(teachers.front());

  if (cfg.mode == RunMode::kFrameOracle) {
    // Comparison model: the corpus contributes true frame-level labels.
    const DatasetManifest corpus =
        clock.run("load_corpus", [&] { return load_manifest(cfg.unlabeled_manifest); });
    std::vector<FrameLabeledSample> frame_labeled;
    clock.run("load_corpus", [&] {
      for (const StackDescriptor& sd : corpus.stacks) {
        Stack stack = load_stack(corpus, sd);
        for (FramePair& fp : stack.frames)
          frame_labeled.push_back({std::move(fp.frame), fp.mask.any_positive()});
      }
    });

    TinyFCN oracle =
        make_tiny_fcn(derive_stream_seed(cfg.master_seed, "init/frame_oracle"));
    TrainConfig tc = cfg.student;
    tc.seed = derive_stream_seed(cfg.master_seed, "train/frame_oracle");
    clock.run("train_frame_oracle", [&] { train_frame_oracle(oracle, labeled, frame_labeled, tc); });

    ModelEntry entry;
    entry.model_id = "frame_oracle";
    entry.checkpoint = "frame_oracle.nsc";
    clock.run("save_student", [&] { save_checkpoint(oracle, tc, out_dir / entry.checkpoint); });
    clock.run("evaluate_student", [&] { evaluate_entry(oracle, cfg, entry); });
    report.entries.push_back(std::move(entry));
    save_run_report(report, out_dir);
    return report;
  }

  DatasetManifest corpus;
  if (iterations > 0)
    corpus = clock.run("load_corpus", [&] { return load_manifest(cfg.unlabeled_manifest); });

  for (int iter = 1; iter <= iterations; ++iter) {
    const std::string iter_dir = "iter_" + std::to_string(iter);
    const std::string teacher_id = report.entries.back().model_id;

    // Step 2: hard pseudo-labels from clean teacher inference.
    const std::vector<ScoredFrame> scored = clock.run("infer_corpus", [&] {
      return infer_corpus(teacher, corpus, out_dir / iter_dir / "scored");
    });

    // Step 3: ranker partition + pixel trinarization.
    const PseudoLabelSet pseudo_set = clock.run("pseudo_label", [&] {
      return build_pseudolabels(scored, corpus.dataset_id, teacher_id, cfg.ranker, apply_ranker,
                                out_dir / iter_dir / "pseudo");
    });
    const TrainingSet pseudo =
        clock.run("pseudo_label", [&] { return load_pseudo_training_set(pseudo_set, corpus); });

    // Step 4: fresh student, noised, trained on the labeled/pseudo mixture.
    const std::string student_tag = "student_" + std::to_string(iter);
    TinyFCN student =
        make_tiny_fcn(derive_stream_seed(cfg.master_seed, "init/" + student_tag));
    TrainConfig tc = cfg.student;
    tc.seed = derive_stream_seed(cfg.master_seed, "train/" + student_tag);
    clock.run("train_student", [&] { train(student, labeled, &pseudo, tc); });

    ModelEntry entry;
    entry.model_id = student_tag;
    entry.checkpoint = student_tag + ".nsc";
    entry.pseudo_set = iter_dir + "/pseudo/pseudolabels.txt";
    clock.run("save_student", [&] { save_checkpoint(student, tc, out_dir / entry.checkpoint); });
    clock.run("evaluate_student", [&] { evaluate_entry(student, cfg, entry); });
    report.entries.push_back(std::move(entry));

    // Step 5: the student becomes the teacher.
    teacher = std::move(student);
  }

  save_run_report(report, out_dir);
  return report;
}

std::vector<AblationRow> run_ablation(const ExperimentConfig& cfg, const std::string& axis,
                                      const std::filesystem::path& out_dir) {
  validate_experiment_config(cfg);
  ensure_dir(out_dir);
  std::vector<AblationRow> rows;

  if (axis == "ranker") {
    ExperimentConfig with = cfg;
    with.mode = RunMode::kNoisyStudent;
    if (with.iterations < 1) with.iterations = 1;
    ExperimentConfig without = with;
    without.mode = RunMode::kNoRankerAblation;

    const RunReport with_report = run_noisy_student(with, out_dir / "with_ranker");
    const RunReport without_report = run_noisy_student(without, out_dir / "no_ranker");
    rows.push_back({"with_ranker", with_report.entries.back().test});
    rows.push_back({"no_ranker", without_report.entries.back().test});
  } else if (axis == "contrast") {
    const std::vector<std::pair<std::string, ContrastPolicy>> grid = {
        {"baseline", ContrastPolicy::kNone},
        {"power_law", ContrastPolicy::kPowerOnly},
        {"log", ContrastPolicy::kLogOnly},
        {"all", ContrastPolicy::kAll},
    };
    for (const auto& [name, policy] : grid) {
      ExperimentConfig variant = cfg;
      variant.mode = RunMode::kBaseline;
      variant.iterations = 0;
      variant.teacher.contrast_policy = policy;
      const RunReport report = run_noisy_student(variant, out_dir / name);
      rows.push_back({name, report.entries.back().test});
    }
  } else {
    throw ParameterError("unknown ablation axis: " + axis);
  }

  KeyValueDoc doc;
  doc.add("axis", axis);
  for (const AblationRow& row : rows) {
    std::vector<std::pair<std::string, std::string>> kv;
    echo_metrics(row.test, "row." + row.name, kv);
    for (auto& [k, v] : kv) doc.add(k, v);
  }
  doc.save(out_dir / "comparison.txt");
  return rows;
}

void save_run_report(const RunReport& report, const std::filesystem::path& out_dir) {
  KeyValueDoc doc;
  for (const auto& [k, v] : report.config_echo) doc.add("config." + k, v);
  for (std::size_t i = 0; i < report.entries.size(); ++i) {
    const ModelEntry& e = report.entries[i];
    const std::string p = "model." + std::to_string(i);
    doc.add(p + ".id", e.model_id);
    doc.add(p + ".checkpoint", e.checkpoint);
    if (!e.pseudo_set.empty()) doc.add(p + ".pseudo_set", e.pseudo_set);
    std::vector<std::pair<std::string, std::string>> kv;
    echo_metrics(e.validation, p + ".validation", kv);
    echo_metrics(e.test, p + ".test", kv);
    for (auto& [k, v] : kv) doc.add(k, v);
  }
  doc.save(out_dir / "report.txt");

  KeyValueDoc timings;
  for (const StageTiming& t : report.timings)
    timings.add(t.stage + "_seconds", format_double(t.seconds));
  timings.save(out_dir / "timings.txt");
}

}  // namespace ns
