#include "ns/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "ns/textio.hpp"

namespace ns {
namespace {

void check_items(const ScoredLabelList& items) {
  for (const ScoredLabel& it : items) {
    if (it.label != 0 && it.label != 1) throw ParameterError("labels must be 0 or 1");
    if (!std::isfinite(it.score)) throw ParameterError("scores must be finite");
  }
}

}  // namespace

double average_precision(const ScoredLabelList& items) {
  check_items(items);
  ScoredLabelList sorted = items;
  // Descending by score; within ties, negatives first (pessimistic AP).
  std::stable_sort(sorted.begin(), sorted.end(), [](const ScoredLabel& a, const ScoredLabel& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.label < b.label;
  });

  std::size_t n_pos = 0;
  double sum = 0.0;
  for (std::size_t rank = 1; rank <= sorted.size(); ++rank) {
    if (sorted[rank - 1].label == 1) {
      ++n_pos;
      sum += static_cast<double>(n_pos) / static_cast<double>(rank);
    }
  }
  if (n_pos == 0) throw UndefinedMetricError("average_precision needs at least one positive");
  return sum / static_cast<double>(n_pos);
}

double roc_auc(const ScoredLabelList& items) {
  check_items(items);
  ScoredLabelList sorted = items;
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredLabel& a, const ScoredLabel& b) { return a.score < b.score; });

  std::uint64_t n_pos = 0, n_neg = 0;
  for (const ScoredLabel& it : sorted) (it.label == 1 ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0)
    throw UndefinedMetricError("roc_auc needs both a positive and a negative");

  // Walk tie groups in ascending score order; each positive beats every
  // negative strictly below it and half-ties the negatives in its group.
  double wins = 0.0;
  std::uint64_t neg_below = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    std::uint64_t group_pos = 0, group_neg = 0;
    while (j < sorted.size() && sorted[j].score == sorted[i].score) {
      (sorted[j].label == 1 ? group_pos : group_neg)++;
      ++j;
    }
    wins += static_cast<double>(group_pos) *
            (static_cast<double>(neg_below) + 0.5 * static_cast<double>(group_neg));
    neg_below += group_neg;
    i = j;
  }
  return wins / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

MetricsReport evaluate_model(const TinyFCN& model, const DatasetManifest& dataset,
                             const std::string& model_id) {
  MetricsReport report;
  report.model_id = model_id;
  report.dataset_id = dataset.dataset_id;

  ScoredLabelList pixels, frames, stacks;

  for (const StackDescriptor& sd : dataset.stacks) {
    const Stack stack = load_stack(dataset, sd);
    std::vector<double> frame_scores;
    bool stack_pos = false;

    for (const FramePair& fp : stack.frames) {
      const ProbMap probs = forward(model, fp.frame);
      bool frame_pos = false;
      for (std::size_t i = 0; i < probs.probs.size(); ++i) {
        const std::uint8_t label = fp.mask.labels[i];
        if (label == kLabelIgnore) continue;  // generator emits none; pseudo-labels may
        pixels.push_back({static_cast<double>(probs.probs[i]), label == kLabelPos ? 1 : 0});
        if (label == kLabelPos) frame_pos = true;
      }
      const double fs = frame_score(probs);
      frames.push_back({fs, frame_pos ? 1 : 0});
      frame_scores.push_back(fs);
      stack_pos = stack_pos || frame_pos;
    }

    stacks.push_back({stack_score(frame_scores), stack_pos ? 1 : 0});
  }

  report.n_pixels = pixels.size();
  report.n_frames = frames.size();
  report.n_stacks = stacks.size();
  for (const auto& it : pixels) report.n_pixel_positives += it.label;
  for (const auto& it : frames) report.n_frame_positives += it.label;
  for (const auto& it : stacks) report.n_stack_positives += it.label;

  try {
    report.pixel_ap = average_precision(pixels);
  } catch (const UndefinedMetricError&) {
    throw UndefinedMetricError("pixel level has a single class on " + dataset.dataset_id);
  }
  try {
    report.frame_ap = average_precision(frames);
  } catch (const UndefinedMetricError&) {
    throw UndefinedMetricError("frame level has a single class on " + dataset.dataset_id);
  }
  try {
    report.stack_ap = average_precision(stacks);
    report.stack_roc_auc = roc_auc(stacks);
  } catch (const UndefinedMetricError&) {
    throw UndefinedMetricError("stack level has a single class on " + dataset.dataset_id);
  }
  return report;
}

void save_metrics_report(const MetricsReport& report, const std::filesystem::path& path) {
  KeyValueDoc doc;
  doc.add("model_id", report.model_id);
  doc.add("dataset_id", report.dataset_id);
  doc.add("pixel_ap_pooling", "global");
  doc.add_double("pixel_ap", report.pixel_ap);
  doc.add_double("frame_ap", report.frame_ap);
  doc.add_double("stack_ap", report.stack_ap);
  doc.add_double("stack_roc_auc", report.stack_roc_auc);
  doc.add_int("n_pixels", static_cast<std::int64_t>(report.n_pixels));
  doc.add_int("n_pixel_positives", static_cast<std::int64_t>(report.n_pixel_positives));
  doc.add_int("n_frames", static_cast<std::int64_t>(report.n_frames));
  doc.add_int("n_frame_positives", static_cast<std::int64_t>(report.n_frame_positives));
  doc.add_int("n_stacks", static_cast<std::int64_t>(report.n_stacks));
  doc.add_int("n_stack_positives", static_cast<std::int64_t>(report.n_stack_positives));
  doc.save(path);
}

MetricsReport load_metrics_report(const std::filesystem::path& path) {
  const KeyValueDoc doc = KeyValueDoc::load(path);
  MetricsReport report;
  report.model_id = doc.get_or("model_id", "");
  report.dataset_id = doc.get_or("dataset_id", "");
  report.pixel_ap = doc.get_double("pixel_ap");
  report.frame_ap = doc.get_double("frame_ap");
  report.stack_ap = doc.get_double("stack_ap");
  report.stack_roc_auc = doc.get_double("stack_roc_auc");
  report.n_pixels = doc.get_u64("n_pixels");
  report.n_pixel_positives = doc.get_u64("n_pixel_positives");
  report.n_frames = doc.get_u64("n_frames");
  report.n_frame_positives = doc.get_u64("n_frame_positives");
  report.n_stacks = doc.get_u64("n_stacks");
  report.n_stack_positives = doc.get_u64("n_stack_positives");
  return report;
}

}  // namespace ns
