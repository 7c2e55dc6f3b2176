#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ns/metrics.hpp"
#include "ns/model.hpp"
#include "ns/phantom.hpp"

namespace ns {

struct FrameRef {
  std::string stack_id;
  int frame_index = 0;

  friend bool operator==(const FrameRef&, const FrameRef&) = default;
};

struct ScoredFrame {
  FrameRef frame_ref;
  double score = 0.0;
  std::filesystem::path prob_map_ref;
};

struct RankerConfig {
  double percentile_c = 10.0;  // percentage of frames marked positive
  double k_pos = 0.7;
  double k_neg = 0.3;
};

void validate_ranker_config(const RankerConfig& cfg);

struct PseudoLabelEntry {
  FrameRef frame_ref;
  bool positive = false;
  std::string mask_rel_path;
};

struct PseudoLabelSet {
  std::string dataset_id;
  std::vector<PseudoLabelEntry> entries;
  RankerConfig ranker;
  std::string teacher_checkpoint_id;
  std::filesystem::path base_dir;
};

/// Clean (un-noised) teacher inference over every frame of a corpus; one
/// ScoredFrame per frame, probability maps persisted under out_dir/probmaps,
/// scores listed in out_dir/scores.txt.
std::vector<ScoredFrame> infer_corpus(const TinyFCN& teacher, const DatasetManifest& corpus,
                                      const std::filesystem::path& out_dir);

std::vector<ScoredFrame> load_scored_frames(const std::filesystem::path& scored_dir);
/// The corpus manifest path recorded by infer_corpus in scores.txt.
std::filesystem::path scored_corpus_manifest(const std::filesystem::path& scored_dir);

/// Sorts descending by score (ties by (stack_id, frame index) ascending) and
/// marks the top ceil(N*C/100) frames positive. Depends on order only.
struct RankPartition {
  std::vector<ScoredFrame> positive;
  std::vector<ScoredFrame> negative;
};
RankPartition rank_and_threshold(const std::vector<ScoredFrame>& scored,
                                 const RankerConfig& cfg);

/// Trinarizes one probability map: for positive frames POS where K > k_pos,
/// NEG where K < k_neg, IGNORE between (boundary equality ignores); negative
/// frames are hard-zeroed to all NEG.
Mask pixel_pseudolabels(const ProbMap& prob_map, bool is_positive, const RankerConfig& cfg);

/// Runs the full ranking + trinarization over a scored corpus and persists
/// mask files plus a pseudo-label manifest under out_dir. When
/// apply_ranker is false every frame is trinarized with no frame partition
/// (the no-ranker ablation).
PseudoLabelSet build_pseudolabels(const std::vector<ScoredFrame>& scored,
                                  const std::string& dataset_id,
                                  const std::string& teacher_checkpoint_id,
                                  const RankerConfig& cfg, bool apply_ranker,
                                  const std::filesystem::path& out_dir);

void save_pseudolabel_set(const PseudoLabelSet& set, const std::filesystem::path& path);
PseudoLabelSet load_pseudolabel_set(const std::filesystem::path& path);

/// Materializes (frame, pseudo-mask) training samples for a pseudo-label set.
TrainingSet load_pseudo_training_set(const PseudoLabelSet& set, const DatasetManifest& corpus);

/// Human-calibration gallery: for each percentile threshold, tiles the
/// n_per_threshold frames whose ranks straddle the cutoff with prob-map
/// contours at k_pos overlaid, written as gallery_C<percent>.ppm (P6) grids.
/// Returns the written file paths.
std::vector<std::filesystem::path> render_gallery(const std::vector<ScoredFrame>& scored,
                                                  const DatasetManifest& corpus,
                                                  const std::vector<double>& thresholds,
                                                  int n_per_threshold, const RankerConfig& cfg,
                                                  const std::filesystem::path& out_dir);

}  // namespace ns
