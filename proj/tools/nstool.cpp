#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ns/metrics.hpp"
#include "ns/model.hpp"
#include "ns/phantom.hpp"
#include "ns/pipeline.hpp"
#include "ns/pseudolabel.hpp"
#include "ns/textio.hpp"

namespace {

namespace fs = std::filesystem;

/// One nstool instance per output directory; prevents artifact races.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    path_ = dir / ".nstool.lock";
    if (fs::exists(path_))
      throw ns::StorageError("output directory is locked by another run: " + path_.string());
    std::ofstream out(path_);
    if (!out) throw ns::StorageError("cannot create lock file: " + path_.string());
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
};

std::vector<double> parse_threshold_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  return out;
}

void print_report_summary(const ns::RunReport& report) {
  for (const ns::ModelEntry& e : report.entries) {
    std::printf("%-16s test stack AP %.4f  frame AP %.4f  pixel AP %.4f  stack AUC %.4f\n",
                e.model_id.c_str(), e.test.stack_ap, e.test.frame_ap, e.test.pixel_ap,
                e.test.stack_roc_auc);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noisy-student self-training toolkit for binary segmentation"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic phantom dataset");
  std::string gen_profile, gen_out, gen_id = "dataset";
  int gen_stacks = 1;
  std::uint64_t gen_seed = 0;
  gen->add_option("--profile", gen_profile, "Domain profile file")->required();
  gen->add_option("--stacks", gen_stacks, "Number of stacks")->required();
  gen->add_option("--seed", gen_seed, "Corpus seed")->required();
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--dataset-id", gen_id, "Dataset identifier");
  gen->set_config("--flags");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the seed model only (baseline)");
  std::string train_config, train_out;
  train_cmd->add_option("--config", train_config, "Experiment config file")->required();
  train_cmd->add_option("--out", train_out, "Run directory")->required();
  train_cmd->set_config("--flags");

  // pseudo-label
  auto* pl = app.add_subcommand("pseudo-label", "Teacher inference + ranker + trinarization");
  std::string pl_teacher, pl_corpus, pl_out;
  double pl_c = 10.0, pl_kpos = 0.7, pl_kneg = 0.3;
  bool pl_no_ranker = false;
  pl->add_option("--teacher", pl_teacher, "Teacher checkpoint")->required();
  pl->add_option("--corpus", pl_corpus, "Corpus manifest")->required();
  pl->add_option("--ranker-c", pl_c, "Percentile cutoff C");
  pl->add_option("--k-pos", pl_kpos, "Positive pixel threshold");
  pl->add_option("--k-neg", pl_kneg, "Negative pixel threshold");
  pl->add_flag("--no-ranker", pl_no_ranker, "Trinarize all frames, no frame partition");
  pl->add_option("--out", pl_out, "Output directory")->required();
  pl->set_config("--flags");

  // gallery
  auto* gal = app.add_subcommand("gallery", "Render calibration galleries near cutoffs");
  std::string gal_scored, gal_out, gal_thresholds = "5,10,15,20,25,30";
  int gal_n = 25;
  double gal_kpos = 0.7, gal_kneg = 0.3;
  gal->add_option("--scored", gal_scored, "Directory written by pseudo-label (scores + prob maps)")
      ->required();
  gal->add_option("--thresholds", gal_thresholds, "Comma-separated percentile thresholds");
  gal->add_option("--n", gal_n, "Frames per threshold");
  gal->add_option("--k-pos", gal_kpos, "Contour threshold");
  gal->add_option("--out", gal_out, "Output directory")->required();
  gal->set_config("--flags");

  // ns-run
  auto* nsr = app.add_subcommand("ns-run", "Full self-training loop");
  std::string nsr_config, nsr_out;
  nsr->add_option("--config", nsr_config, "Experiment config file")->required();
  nsr->add_option("--out", nsr_out, "Run directory")->required();
  nsr->set_config("--flags");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  std::string ev_model, ev_dataset, ev_out;
  ev->add_option("--model", ev_model, "Checkpoint file")->required();
  ev->add_option("--dataset", ev_dataset, "Dataset manifest")->required();
  ev->add_option("--out", ev_out, "Metrics report output file")->required();
  ev->set_config("--flags");

  // ablate
  auto* ab = app.add_subcommand("ablate", "Ranker or contrast ablation grid");
  std::string ab_config, ab_axis, ab_out;
  ab->add_option("--config", ab_config, "Experiment config file")->required();
  ab->add_option("--axis", ab_axis, "ranker|contrast")->required();
  ab->add_option("--out", ab_out, "Output directory")->required();
  ab->set_config("--flags");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      DirLock lock(gen_out);
      const ns::DomainProfile profile = ns::load_profile(gen_profile);
      const ns::DatasetManifest manifest =
          ns::generate_corpus(profile, gen_stacks, gen_seed, gen_id, gen_out);
      std::printf("wrote %zu stacks under %s\n", manifest.stacks.size(), gen_out.c_str());
    } else if (*train_cmd) {
      DirLock lock(train_out);
      ns::ExperimentConfig cfg = ns::load_experiment_config(train_config);
      cfg.mode = ns::RunMode::kBaseline;
      const ns::RunReport report = ns::run_noisy_student(cfg, train_out);
      print_report_summary(report);
    } else if (*pl) {
      DirLock lock(pl_out);
      const ns::Checkpoint ckpt = ns::load_checkpoint(pl_teacher);
      const ns::DatasetManifest corpus = ns::load_manifest(pl_corpus);
      ns::RankerConfig rc;
      rc.percentile_c = pl_c;
      rc.k_pos = pl_kpos;
      rc.k_neg = pl_kneg;
      const auto scored = ns::infer_corpus(ckpt.model, corpus, pl_out);
      const ns::PseudoLabelSet set = ns::build_pseudolabels(
          scored, corpus.dataset_id, fs::path(pl_teacher).filename().string(), rc, !pl_no_ranker,
          pl_out);
      std::size_t positives = 0;
      for (const auto& e : set.entries) positives += e.positive ? 1 : 0;
      std::printf("pseudo-labeled %zu frames (%zu positive) under %s\n", set.entries.size(),
                  positives, pl_out.c_str());
    } else if (*gal) {
      DirLock lock(gal_out);
      const auto scored = ns::load_scored_frames(gal_scored);
      const ns::DatasetManifest corpus =
          ns::load_manifest(ns::scored_corpus_manifest(gal_scored));
      ns::RankerConfig rc;
      rc.k_pos = gal_kpos;
      rc.k_neg = gal_kneg;
      const auto files = ns::render_gallery(scored, corpus, parse_threshold_list(gal_thresholds),
                                            gal_n, rc, gal_out);
      for (const auto& f : files) std::printf("%s\n", f.string().c_str());
    } else if (*nsr) {
      DirLock lock(nsr_out);
      const ns::ExperimentConfig cfg = ns::load_experiment_config(nsr_config);
      const ns::RunReport report = ns::run_noisy_student(cfg, nsr_out);
      print_report_summary(report);
    } else if (*ev) {
      const ns::Checkpoint ckpt = ns::load_checkpoint(ev_model);
      const ns::DatasetManifest dataset = ns::load_manifest(ev_dataset);
      const ns::MetricsReport report =
          ns::evaluate_model(ckpt.model, dataset, fs::path(ev_model).filename().string());
      ns::save_metrics_report(report, ev_out);
      std::printf("pixel AP %.4f  frame AP %.4f  stack AP %.4f  stack AUC %.4f\n",
                  report.pixel_ap, report.frame_ap, report.stack_ap, report.stack_roc_auc);
    } else if (*ab) {
      DirLock lock(ab_out);
      const ns::ExperimentConfig cfg = ns::load_experiment_config(ab_config);
      const auto rows = ns::run_ablation(cfg, ab_axis, ab_out);
      for (const auto& row : rows)
        std::printf("%-12s stack AP %.4f  frame AP %.4f  pixel AP %.4f\n", row.name.c_str(),
                    row.test.stack_ap, row.test.frame_ap, row.test.pixel_ap);
    }
  } catch (const ns::StageError& e) {
    std::cerr << "error in stage '" << e.stage << "': " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
