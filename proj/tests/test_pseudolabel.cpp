#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "ns/pseudolabel.hpp"

using namespace ns;

namespace {

namespace fs = std::filesystem;

std::vector<ScoredFrame> scored_fixture(int n, std::uint64_t seed = 7) {
  Rng rng(seed);
  std::vector<ScoredFrame> scored;
  for (int i = 0; i < n; ++i) {
    ScoredFrame sf;
    sf.frame_ref = {"stk" + std::to_string(i / 4), i % 4};
    sf.score = rng.next_double();
    scored.push_back(sf);
  }
  return scored;
}

std::set<std::pair<std::string, int>> positive_keys(const RankPartition& part) {
  std::set<std::pair<std::string, int>> keys;
  for (const ScoredFrame& sf : part.positive)
    keys.insert({sf.frame_ref.stack_id, sf.frame_ref.frame_index});
  return keys;
}

ProbMap make_probs(std::vector<float> values) {
  ProbMap map;
  map.height = 1;
  map.width = static_cast<int>(values.size());
  map.probs = std::move(values);
  return map;
}

DomainProfile small_profile() {
  DomainProfile p;
  p.domain_id = "unit";
  p.noise_sigma = 0.02;
  p.contrast_bias = 1.0;
  p.head_scale = 0.35;
  p.lesion_rate = 0.4;
  p.lesion_brightness = 0.35;
  p.frame_height = 32;
  p.frame_width = 32;
  p.frames_per_stack = 3;
  return p;
}

std::string file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("ranker marks exactly ceil(N*C/100) frames positive") {
  const RankerConfig base;
  for (int n : {1, 7, 10, 53, 100, 137}) {
    const std::vector<ScoredFrame> scored = scored_fixture(n);
    for (double c : {0.5, 1.0, 10.0, 14.0, 33.3, 99.0}) {
      RankerConfig cfg = base;
      cfg.percentile_c = c;
      const RankPartition part = rank_and_threshold(scored, cfg);
      const auto expected =
          static_cast<std::size_t>(std::ceil(static_cast<double>(n) * c / 100.0));
      CHECK(part.positive.size() == expected);
      CHECK(part.positive.size() + part.negative.size() == scored.size());
    }
  }
}

TEST_CASE("ranker boundary percentiles") {
  const std::vector<ScoredFrame> scored = scored_fixture(20);
  RankerConfig cfg;
  cfg.percentile_c = 0.0;
  CHECK(rank_and_threshold(scored, cfg).positive.empty());
  cfg.percentile_c = 100.0;
  CHECK(rank_and_threshold(scored, cfg).positive.size() == 20);
  cfg.percentile_c = -1.0;
  CHECK_THROWS_AS(validate_ranker_config(cfg), ParameterError);
  cfg.percentile_c = 101.0;
  CHECK_THROWS_AS(validate_ranker_config(cfg), ParameterError);
  cfg = RankerConfig{};
  cfg.k_pos = 0.2;  // below k_neg
  CHECK_THROWS_AS(validate_ranker_config(cfg), ParameterError);
}

TEST_CASE("ranker positives are nested as the percentile grows") {
  const std::vector<ScoredFrame> scored = scored_fixture(60);
  RankerConfig lo, hi;
  lo.percentile_c = 10.0;
  hi.percentile_c = 25.0;
  const auto keys_lo = positive_keys(rank_and_threshold(scored, lo));
  const auto keys_hi = positive_keys(rank_and_threshold(scored, hi));
  CHECK(std::includes(keys_hi.begin(), keys_hi.end(), keys_lo.begin(), keys_lo.end()));
}

TEST_CASE("ranker depends on score order only") {
  std::vector<ScoredFrame> scored = scored_fixture(40);
  RankerConfig cfg;
  cfg.percentile_c = 15.0;
  const auto base = positive_keys(rank_and_threshold(scored, cfg));

  // Monotone transform of every score leaves the partition unchanged.
  std::vector<ScoredFrame> squashed = scored;
  for (ScoredFrame& sf : squashed) sf.score = 1.0 / (1.0 + std::exp(-6.0 * sf.score));
  CHECK(positive_keys(rank_and_threshold(squashed, cfg)) == base);

  // So does shuffling the input order.
  std::vector<ScoredFrame> shuffled = scored;
  Rng rng(99);
  for (std::size_t i = shuffled.size(); i > 1; --i)
    std::swap(shuffled[i - 1], shuffled[rng.next_below(i)]);
  CHECK(positive_keys(rank_and_threshold(shuffled, cfg)) == base);
}

TEST_CASE("ranker breaks score ties by stack id then frame index") {
  std::vector<ScoredFrame> scored;
  for (const auto& [sid, fi] : std::vector<std::pair<std::string, int>>{
           {"b", 0}, {"a", 1}, {"a", 0}, {"c", 0}}) {
    ScoredFrame sf;
    sf.frame_ref = {sid, fi};
    sf.score = 0.5;
    scored.push_back(sf);
  }
  RankerConfig cfg;
  cfg.percentile_c = 50.0;  // top 2 of 4
  const RankPartition part = rank_and_threshold(scored, cfg);
  REQUIRE(part.positive.size() == 2);
  CHECK(part.positive[0].frame_ref == FrameRef{"a", 0});
  CHECK(part.positive[1].frame_ref == FrameRef{"a", 1});
}

TEST_CASE("pixel trinarization thresholds") {
  const RankerConfig cfg;  // k_pos 0.7, k_neg 0.3
  const ProbMap probs = make_probs({0.71f, 0.5f, 0.29f, 0.7f, 0.3f});

  SUBCASE("positive frame") {
    const Mask m = pixel_pseudolabels(probs, true, cfg);
    CHECK(m.labels == std::vector<std::uint8_t>{kLabelPos, kLabelIgnore, kLabelNeg,
                                                kLabelIgnore, kLabelIgnore});
  }
  SUBCASE("negative frame is hard-zeroed") {
    const Mask m = pixel_pseudolabels(probs, false, cfg);
    for (std::uint8_t label : m.labels) CHECK(label == kLabelNeg);
  }
  SUBCASE("custom thresholds") {
    RankerConfig wide;
    wide.k_pos = 0.9;
    wide.k_neg = 0.1;
    const Mask m = pixel_pseudolabels(make_probs({0.95f, 0.5f, 0.05f}), true, wide);
    CHECK(m.labels == std::vector<std::uint8_t>{kLabelPos, kLabelIgnore, kLabelNeg});
  }
}

TEST_CASE("infer_corpus scores every frame and persists deterministically") {
  const fs::path data_dir = fs::temp_directory_path() / "nstest_pl_data";
  const fs::path out_a = fs::temp_directory_path() / "nstest_pl_scored_a";
  const fs::path out_b = fs::temp_directory_path() / "nstest_pl_scored_b";
  fs::remove_all(data_dir);
  fs::remove_all(out_a);
  fs::remove_all(out_b);
  const DatasetManifest corpus = generate_corpus(small_profile(), 4, 11, "plc", data_dir);

  const TinyFCN teacher = make_tiny_fcn(3);
  const std::vector<ScoredFrame> scored = infer_corpus(teacher, corpus, out_a);
  CHECK(scored.size() == 4 * 3);
  for (const ScoredFrame& sf : scored) {
    CHECK((sf.score > 0.0 && sf.score < 1.0));
    CHECK(fs::exists(sf.prob_map_ref));
    const ProbMap map = load_prob_map(sf.prob_map_ref);
    CHECK(map.height == 32);
    // Persisted score equals the max pixel probability of the saved map.
    CHECK(sf.score == frame_score(map));
  }

  const std::vector<ScoredFrame> reloaded = load_scored_frames(out_a);
  REQUIRE(reloaded.size() == scored.size());
  for (std::size_t i = 0; i < scored.size(); ++i) {
    CHECK(reloaded[i].frame_ref == scored[i].frame_ref);
    CHECK(reloaded[i].score == scored[i].score);
  }
  CHECK(scored_corpus_manifest(out_a) == fs::absolute(data_dir / "manifest.txt"));

  (void)infer_corpus(teacher, corpus, out_b);
  CHECK(file_bytes(out_a / "scores.txt") == file_bytes(out_b / "scores.txt"));

  SUBCASE("all-zero teacher scores every frame 0.5") {
    TinyFCN zero = make_tiny_fcn(1);
    for (ConvLayer& layer : zero.layers) {
      std::fill(layer.weights.begin(), layer.weights.end(), 0.0f);
      std::fill(layer.bias.begin(), layer.bias.end(), 0.0f);
    }
    const fs::path out_z = fs::temp_directory_path() / "nstest_pl_scored_z";
    fs::remove_all(out_z);
    for (const ScoredFrame& sf : infer_corpus(zero, corpus, out_z))
      CHECK(sf.score == 0.5);
    fs::remove_all(out_z);
  }

  fs::remove_all(data_dir);
  fs::remove_all(out_a);
  fs::remove_all(out_b);
}

TEST_CASE("build_pseudolabels invariants and manifest round-trip") {
  const fs::path data_dir = fs::temp_directory_path() / "nstest_pl_build_data";
  const fs::path scored_dir = fs::temp_directory_path() / "nstest_pl_build_scored";
  const fs::path out_dir = fs::temp_directory_path() / "nstest_pl_build_out";
  fs::remove_all(data_dir);
  fs::remove_all(scored_dir);
  fs::remove_all(out_dir);

  const DatasetManifest corpus = generate_corpus(small_profile(), 5, 21, "plb", data_dir);
  const TinyFCN teacher = make_tiny_fcn(8);
  const std::vector<ScoredFrame> scored = infer_corpus(teacher, corpus, scored_dir);

  RankerConfig cfg;
  cfg.percentile_c = 20.0;
  const PseudoLabelSet set =
      build_pseudolabels(scored, "plb", "teacher0", cfg, true, out_dir);

  const auto n_pos = static_cast<std::size_t>(
      std::count_if(set.entries.begin(), set.entries.end(),
                    [](const PseudoLabelEntry& e) { return e.positive; }));
  CHECK(n_pos == static_cast<std::size_t>(std::ceil(scored.size() * 20.0 / 100.0)));
  CHECK(set.entries.size() == scored.size());

  // Entries are sorted by (stack_id, frame_index).
  for (std::size_t i = 1; i < set.entries.size(); ++i) {
    const auto& a = set.entries[i - 1].frame_ref;
    const auto& b = set.entries[i].frame_ref;
    CHECK(std::tie(a.stack_id, a.frame_index) < std::tie(b.stack_id, b.frame_index));
  }

  // Negative frames carry all-NEG masks; POS pixels only appear in positives.
  for (const PseudoLabelEntry& e : set.entries) {
    const Mask m = load_mask(out_dir / e.mask_rel_path);
    bool any_pos = false;
    for (std::uint8_t label : m.labels) any_pos = any_pos || label == kLabelPos;
    if (!e.positive)
      for (std::uint8_t label : m.labels) CHECK(label == kLabelNeg);
    CHECK((e.positive || !any_pos));
  }

  const PseudoLabelSet loaded = load_pseudolabel_set(out_dir / "pseudolabels.txt");
  CHECK(loaded.dataset_id == set.dataset_id);
  CHECK(loaded.teacher_checkpoint_id == "teacher0");
  CHECK(loaded.ranker.percentile_c == 20.0);
  REQUIRE(loaded.entries.size() == set.entries.size());
  for (std::size_t i = 0; i < set.entries.size(); ++i) {
    CHECK(loaded.entries[i].frame_ref == set.entries[i].frame_ref);
    CHECK(loaded.entries[i].positive == set.entries[i].positive);
    CHECK(loaded.entries[i].mask_rel_path == set.entries[i].mask_rel_path);
  }

  const TrainingSet training = load_pseudo_training_set(loaded, corpus);
  CHECK(training.size() == set.entries.size());
  for (const TrainingSample& s : training) {
    CHECK(s.frame.height == s.mask.height);
    CHECK(s.frame.width == s.mask.width);
  }

  SUBCASE("disabled ranker trinarizes every frame") {
    const fs::path nr_dir = fs::temp_directory_path() / "nstest_pl_build_nr";
    fs::remove_all(nr_dir);
    const PseudoLabelSet nr =
        build_pseudolabels(scored, "plb", "teacher0", cfg, false, nr_dir);
    CHECK(nr.entries.size() == scored.size());
    for (const PseudoLabelEntry& e : nr.entries) CHECK(e.positive);
    fs::remove_all(nr_dir);
  }

  fs::remove_all(data_dir);
  fs::remove_all(scored_dir);
  fs::remove_all(out_dir);
}

TEST_CASE("gallery rendering") {
  const fs::path data_dir = fs::temp_directory_path() / "nstest_pl_gal_data";
  const fs::path scored_dir = fs::temp_directory_path() / "nstest_pl_gal_scored";
  const fs::path gal_a = fs::temp_directory_path() / "nstest_pl_gal_a";
  const fs::path gal_b = fs::temp_directory_path() / "nstest_pl_gal_b";
  for (const fs::path& d : {data_dir, scored_dir, gal_a, gal_b}) fs::remove_all(d);

  const DatasetManifest corpus = generate_corpus(small_profile(), 6, 31, "gal", data_dir);
  const TinyFCN teacher = make_tiny_fcn(5);
  const std::vector<ScoredFrame> scored = infer_corpus(teacher, corpus, scored_dir);

  const std::vector<double> thresholds = {2.0, 6.0, 10.0, 14.0, 20.0, 30.0};
  const RankerConfig cfg;
  const auto files = render_gallery(scored, corpus, thresholds, 6, cfg, gal_a);
  REQUIRE(files.size() == thresholds.size());
  for (const fs::path& f : files) {
    CHECK(fs::exists(f));
    CHECK(file_bytes(f).substr(0, 2) == "P6");
  }
  CHECK(files[0].filename() == "gallery_C2.ppm");
  CHECK(files[3].filename() == "gallery_C14.ppm");

  CHECK(render_gallery(scored, corpus, {}, 6, cfg, gal_a).empty());

  const auto again = render_gallery(scored, corpus, thresholds, 6, cfg, gal_b);
  for (std::size_t i = 0; i < files.size(); ++i)
    CHECK(file_bytes(files[i]) == file_bytes(again[i]));

  for (const fs::path& d : {data_dir, scored_dir, gal_a, gal_b}) fs::remove_all(d);
}
