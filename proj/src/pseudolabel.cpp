#include "ns/pseudolabel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>

#include "ns/textio.hpp"

namespace ns {
namespace {

std::string frame_tag(const FrameRef& ref) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "_f%04d", ref.frame_index);
  return ref.stack_id + buf;
}

bool rank_before(const ScoredFrame& a, const ScoredFrame& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.frame_ref.stack_id != b.frame_ref.stack_id)
    return a.frame_ref.stack_id < b.frame_ref.stack_id;
  return a.frame_ref.frame_index < b.frame_ref.frame_index;
}

std::size_t positive_count(std::size_t n, double percentile_c) {
  return static_cast<std::size_t>(std::ceil(static_cast<double>(n) * percentile_c / 100.0));
}

std::string format_threshold(double c) {
  if (c == std::floor(c)) return std::to_string(static_cast<long long>(c));
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", c);
  return buf;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw StorageError("cannot create directory: " + dir.string());
}

}  // namespace

void validate_ranker_config(const RankerConfig& cfg) {
  if (!(cfg.percentile_c >= 0.0 && cfg.percentile_c <= 100.0))
    throw ParameterError("percentile_c must be in [0,100]");
  if (!(cfg.k_neg > 0.0 && cfg.k_neg < cfg.k_pos && cfg.k_pos < 1.0))
    throw ParameterError("thresholds must satisfy 0 < k_neg < k_pos < 1");
}

std::vector<ScoredFrame> infer_corpus(const TinyFCN& teacher, const DatasetManifest& corpus,
                                      const std::filesystem::path& out_dir) {
  ensure_dir(out_dir / "probmaps");

  std::vector<ScoredFrame> scored;
  KeyValueDoc doc;
  doc.add("corpus", std::filesystem::absolute(corpus.base_dir / "manifest.txt").string());

  for (const StackDescriptor& sd : corpus.stacks) {
    const Stack stack = load_stack(corpus, sd);
    for (int fi = 0; fi < static_cast<int>(stack.frames.size()); ++fi) {
      const ProbMap probs = forward(teacher, stack.frames[fi].frame);

      ScoredFrame sf;
      sf.frame_ref = FrameRef{sd.stack_id, fi};
      sf.score = frame_score(probs);
      const std::string rel = "probmaps/" + frame_tag(sf.frame_ref) + ".nsp";
      sf.prob_map_ref = out_dir / rel;
      save_prob_map(probs, sf.prob_map_ref);

      doc.add("frame", sd.stack_id + " " + std::to_string(fi) + " " + format_double(sf.score) +
                           " " + rel);
      scored.push_back(std::move(sf));
    }
  }

  doc.save(out_dir / "scores.txt");
  return scored;
}

std::vector<ScoredFrame> load_scored_frames(const std::filesystem::path& scored_dir) {
  const KeyValueDoc doc = KeyValueDoc::load(scored_dir / "scores.txt");
  std::vector<ScoredFrame> scored;
  for (const std::string& line : doc.get_all("frame")) {
    const auto fields = split_fields(line);
    if (fields.size() != 4) throw FormatError("bad frame record in scores.txt");
    ScoredFrame sf;
    sf.frame_ref.stack_id = fields[0];
    sf.frame_ref.frame_index = std::stoi(fields[1]);
    sf.score = std::stod(fields[2]);
    sf.prob_map_ref = scored_dir / fields[3];
    scored.push_back(std::move(sf));
  }
  return scored;
}

std::filesystem::path scored_corpus_manifest(const std::filesystem::path& scored_dir) {
  return KeyValueDoc::load(scored_dir / "scores.txt").get("corpus");
}

RankPartition rank_and_threshold(const std::vector<ScoredFrame>& scored,
                                 const RankerConfig& cfg) {
  validate_ranker_config(cfg);
  if (scored.empty()) throw ParameterError("rank_and_threshold on empty score list");

  // Index sort keeps the hot path cheap for large score lists.
  std::vector<std::uint32_t> order(scored.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return rank_before(scored[a], scored[b]);
  });

  const std::size_t n_pos = positive_count(scored.size(), cfg.percentile_c);
  RankPartition out;
  out.positive.reserve(n_pos);
  out.negative.reserve(scored.size() - n_pos);
  for (std::size_t r = 0; r < order.size(); ++r)
    (r < n_pos ? out.positive : out.negative).push_back(scored[order[r]]);
  return out;
}

Mask pixel_pseudolabels(const ProbMap& prob_map, bool is_positive, const RankerConfig& cfg) {
  validate_ranker_config(cfg);
  Mask mask = make_mask(prob_map.height, prob_map.width, kLabelNeg);
  if (!is_positive) return mask;  // below-cutoff frames are hard-zeroed

  for (std::size_t i = 0; i < prob_map.probs.size(); ++i) {
    const double k = prob_map.probs[i];
    if (k > cfg.k_pos)
      mask.labels[i] = kLabelPos;
    else if (k < cfg.k_neg)
      mask.labels[i] = kLabelNeg;
    else
      mask.labels[i] = kLabelIgnore;
  }
  return mask;
}

PseudoLabelSet build_pseudolabels(const std::vector<ScoredFrame>& scored,
                                  const std::string& dataset_id,
                                  const std::string& teacher_checkpoint_id,
                                  const RankerConfig& cfg, bool apply_ranker,
                                  const std::filesystem::path& out_dir) {
  ensure_dir(out_dir / "masks");

  struct Tagged {
    ScoredFrame frame;
    bool positive;
  };
  std::vector<Tagged> tagged;
  if (apply_ranker) {
    const RankPartition parts = rank_and_threshold(scored, cfg);
    for (const ScoredFrame& sf : parts.positive) tagged.push_back({sf, true});
    for (const ScoredFrame& sf : parts.negative) tagged.push_back({sf, false});
  } else {
    // No-ranker ablation: trinarize every frame, no partition.
    for (const ScoredFrame& sf : scored) tagged.push_back({sf, true});
  }
  std::sort(tagged.begin(), tagged.end(), [](const Tagged& a, const Tagged& b) {
    if (a.frame.frame_ref.stack_id != b.frame.frame_ref.stack_id)
      return a.frame.frame_ref.stack_id < b.frame.frame_ref.stack_id;
    return a.frame.frame_ref.frame_index < b.frame.frame_ref.frame_index;
  });

  PseudoLabelSet set;
  set.dataset_id = dataset_id;
  set.ranker = cfg;
  set.teacher_checkpoint_id = teacher_checkpoint_id;
  set.base_dir = out_dir;

  for (const Tagged& t : tagged) {
    const ProbMap probs = load_prob_map(t.frame.prob_map_ref);
    const Mask mask = pixel_pseudolabels(probs, t.positive, cfg);
    PseudoLabelEntry entry;
    entry.frame_ref = t.frame.frame_ref;
    entry.positive = t.positive;
    entry.mask_rel_path = "masks/" + frame_tag(t.frame.frame_ref) + ".nsm";
    save_mask(mask, out_dir / entry.mask_rel_path);
    set.entries.push_back(std::move(entry));
  }

  save_pseudolabel_set(set, out_dir / "pseudolabels.txt");
  return set;
}

void save_pseudolabel_set(const PseudoLabelSet& set, const std::filesystem::path& path) {
  KeyValueDoc doc;
  doc.add("dataset_id", set.dataset_id);
  doc.add("teacher_checkpoint", set.teacher_checkpoint_id);
  doc.add_double("ranker.percentile_c", set.ranker.percentile_c);
  doc.add_double("ranker.k_pos", set.ranker.k_pos);
  doc.add_double("ranker.k_neg", set.ranker.k_neg);
  for (const PseudoLabelEntry& e : set.entries) {
    doc.add("entry", e.frame_ref.stack_id + " " + std::to_string(e.frame_ref.frame_index) + " " +
                         (e.positive ? "1" : "0") + " " + e.mask_rel_path);
  }
  doc.save(path);
}

PseudoLabelSet load_pseudolabel_set(const std::filesystem::path& path) {
  const KeyValueDoc doc = KeyValueDoc::load(path);
  PseudoLabelSet set;
  set.dataset_id = doc.get("dataset_id");
  set.teacher_checkpoint_id = doc.get("teacher_checkpoint");
  set.ranker.percentile_c = doc.get_double("ranker.percentile_c");
  set.ranker.k_pos = doc.get_double("ranker.k_pos");
  set.ranker.k_neg = doc.get_double("ranker.k_neg");
  set.base_dir = path.parent_path();
  for (const std::string& line : doc.get_all("entry")) {
    const auto fields = split_fields(line);
    if (fields.size() != 4) throw FormatError("bad entry record in " + path.string());
    PseudoLabelEntry e;
    e.frame_ref.stack_id = fields[0];
    e.frame_ref.frame_index = std::stoi(fields[1]);
    e.positive = fields[2] == "1";
    e.mask_rel_path = fields[3];
    if (!std::filesystem::exists(set.base_dir / e.mask_rel_path))
      throw StorageError("missing pseudo-label mask: " + (set.base_dir / e.mask_rel_path).string());
    set.entries.push_back(std::move(e));
  }
  return set;
}

TrainingSet load_pseudo_training_set(const PseudoLabelSet& set, const DatasetManifest& corpus) {
  std::map<std::string, const StackDescriptor*> by_id;
  for (const StackDescriptor& sd : corpus.stacks) by_id[sd.stack_id] = &sd;

  // Group entries per stack so each stack is loaded once.
  std::map<std::string, std::vector<const PseudoLabelEntry*>> grouped;
  for (const PseudoLabelEntry& e : set.entries) grouped[e.frame_ref.stack_id].push_back(&e);

  TrainingSet out;
  for (const auto& [stack_id, entries] : grouped) {
    const auto it = by_id.find(stack_id);
    if (it == by_id.end())
      throw FormatError("pseudo-label entry references unknown stack " + stack_id);
    const Stack stack = load_stack(corpus, *it->second);
    for (const PseudoLabelEntry* e : entries) {
      if (e->frame_ref.frame_index < 0 ||
          e->frame_ref.frame_index >= static_cast<int>(stack.frames.size()))
        throw FormatError("pseudo-label entry frame index out of range for " + stack_id);
      TrainingSample sample;
      sample.frame = stack.frames[e->frame_ref.frame_index].frame;
      sample.mask = load_mask(set.base_dir / e->mask_rel_path);
      out.push_back(std::move(sample));
    }
  }
  return out;
}

namespace {

struct RgbImage {
  int height = 0, width = 0;
  std::vector<std::uint8_t> data;  // rgb interleaved

  void set(int r, int c, std::uint8_t red, std::uint8_t green, std::uint8_t blue) {
    const std::size_t i = (static_cast<std::size_t>(r) * width + c) * 3;
    data[i] = red;
    data[i + 1] = green;
    data[i + 2] = blue;
  }
};

void write_ppm(const RgbImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StorageError("cannot open file for writing: " + path.string());
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
  if (!out) throw StorageError("write failed: " + path.string());
}

/// Renders one frame with the prob-map contour at k_pos drawn in red.
void draw_tile(RgbImage& img, int top, int left, const Frame& frame, const ProbMap& probs,
               double k_pos) {
  for (int r = 0; r < frame.height; ++r) {
    for (int c = 0; c < frame.width; ++c) {
      const auto gray = static_cast<std::uint8_t>(
          std::lround(std::clamp(static_cast<double>(frame.at(r, c)), 0.0, 1.0) * 255.0));
      bool contour = false;
      if (probs.at(r, c) > k_pos) {
        // Boundary pixel of the above-threshold region (4-neighborhood).
        const bool n = r > 0 && probs.at(r - 1, c) > k_pos;
        const bool s = r + 1 < frame.height && probs.at(r + 1, c) > k_pos;
        const bool w = c > 0 && probs.at(r, c - 1) > k_pos;
        const bool e = c + 1 < frame.width && probs.at(r, c + 1) > k_pos;
        contour = !(n && s && w && e);
      }
      if (contour)
        img.set(top + r, left + c, 255, 32, 32);
      else
        img.set(top + r, left + c, gray, gray, gray);
    }
  }
}

}  // namespace

std::vector<std::filesystem::path> render_gallery(const std::vector<ScoredFrame>& scored,
                                                  const DatasetManifest& corpus,
                                                  const std::vector<double>& thresholds,
                                                  int n_per_threshold, const RankerConfig& cfg,
                                                  const std::filesystem::path& out_dir) {
  if (n_per_threshold < 1) throw ParameterError("n_per_threshold must be >= 1");
  for (double c : thresholds)
    if (!(c >= 0.0 && c <= 100.0)) throw ParameterError("thresholds must be in [0,100]");
  if (thresholds.empty()) return {};
  ensure_dir(out_dir);

  std::vector<ScoredFrame> sorted = scored;
  std::sort(sorted.begin(), sorted.end(), rank_before);

  int n = n_per_threshold;
  if (static_cast<int>(sorted.size()) < n) {
    std::cerr << "gallery: corpus has only " << sorted.size() << " frames, requested " << n
              << " per threshold; using all frames\n";
    n = static_cast<int>(sorted.size());
  }
  if (n == 0) return {};

  std::map<std::string, Stack> stacks;
  for (const StackDescriptor& sd : corpus.stacks) stacks.emplace(sd.stack_id, Stack{});
  auto get_stack = [&](const std::string& id) -> const Stack& {
    auto it = stacks.find(id);
    if (it == stacks.end()) throw FormatError("scored frame references unknown stack " + id);
    if (it->second.frames.empty()) {
      for (const StackDescriptor& sd : corpus.stacks)
        if (sd.stack_id == id) it->second = load_stack(corpus, sd);
    }
    return it->second;
  };

  const int tile_h = corpus.profile.frame_height;
  const int tile_w = corpus.profile.frame_width;
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  const int rows = (n + cols - 1) / cols;

  std::vector<std::filesystem::path> written;
  for (double c : thresholds) {
    // Tiles straddle the percentile boundary: the calibration question is
    // whether false positives appear near the cutoff.
    const auto boundary = static_cast<long>(positive_count(sorted.size(), c));
    long start = boundary - n / 2;
    start = std::clamp(start, 0L, static_cast<long>(sorted.size()) - n);

    RgbImage grid;
    grid.height = rows * tile_h;
    grid.width = cols * tile_w;
    grid.data.assign(static_cast<std::size_t>(grid.height) * grid.width * 3, 0);

    for (int i = 0; i < n; ++i) {
      const ScoredFrame& sf = sorted[static_cast<std::size_t>(start + i)];
      const Stack& stack = get_stack(sf.frame_ref.stack_id);
      const Frame& frame = stack.frames[sf.frame_ref.frame_index].frame;
      const ProbMap probs = load_prob_map(sf.prob_map_ref);
      draw_tile(grid, (i / cols) * tile_h, (i % cols) * tile_w, frame, probs, cfg.k_pos);
    }

    const std::filesystem::path path = out_dir / ("gallery_C" + format_threshold(c) + ".ppm");
    write_ppm(grid, path);
    written.push_back(path);
  }
  return written;
}

}  // namespace ns
