#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ns/model.hpp"
#include "ns/phantom.hpp"

namespace ns {

struct ScoredLabel {
  double score = 0.0;
  int label = 0;  // 0 or 1
};

using ScoredLabelList = std::vector<ScoredLabel>;

/// Retrieval AP: sort descending by score (negatives ranked first within a
/// tie group), then mean over positives of precision at each positive's rank.
double average_precision(const ScoredLabelList& items);

/// Mann-Whitney AUC: fraction of (positive, negative) pairs with
/// score_pos > score_neg, ties counted 0.5.
double roc_auc(const ScoredLabelList& items);

struct MetricsReport {
  double pixel_ap = 0.0;
  double frame_ap = 0.0;
  double stack_ap = 0.0;
  double stack_roc_auc = 0.0;
  std::uint64_t n_pixels = 0;
  std::uint64_t n_pixel_positives = 0;
  std::uint64_t n_frames = 0;
  std::uint64_t n_frame_positives = 0;
  std::uint64_t n_stacks = 0;
  std::uint64_t n_stack_positives = 0;
  std::string model_id;
  std::string dataset_id;
};

/// Scores every frame of the dataset and computes pixel AP (globally pooled),
/// frame AP, stack AP, and stack ROC-AUC against the ground-truth masks.
MetricsReport evaluate_model(const TinyFCN& model, const DatasetManifest& dataset,
                             const std::string& model_id = "");

void save_metrics_report(const MetricsReport& report, const std::filesystem::path& path);
MetricsReport load_metrics_report(const std::filesystem::path& path);

}  // namespace ns
