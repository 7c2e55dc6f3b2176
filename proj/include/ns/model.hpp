#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "ns/augment.hpp"
#include "ns/common.hpp"
#include "ns/image.hpp"
#include "ns/phantom.hpp"

namespace ns {

/// One 2D convolution layer, same-padding. Weights are [out_ch][in_ch][kh][kw]
/// row-major; parameters are stored as f32 so checkpoints round-trip bit-exact,
/// while all arithmetic runs in double.
struct ConvLayer {
  int out_ch = 0;
  int in_ch = 0;
  int kh = 0;
  int kw = 0;
  std::vector<float> weights;
  std::vector<float> bias;

  // Momentum state, not serialized.
  std::vector<float> vel_weights;
  std::vector<float> vel_bias;

  std::size_t weight_count() const {
    return static_cast<std::size_t>(out_ch) * in_ch * kh * kw;
  }
};

/// Small fully-convolutional pixel classifier: leaky-rectifier (slope 0.01)
/// between layers, sigmoid on the single-channel output.
struct TinyFCN {
  std::vector<ConvLayer> layers;
};

struct LayerGrads {
  std::vector<double> weights;
  std::vector<double> bias;
};

using ModelGrads = std::vector<LayerGrads>;

struct TrainConfig {
  int epochs = 30;
  int batch_size = 8;
  int crop_size = 32;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double mix_ratio_labeled = 0.6;
  std::uint64_t seed = 0;
  ContrastPolicy contrast_policy = ContrastPolicy::kAll;
};

void validate_train_config(const TrainConfig& cfg);

/// Builds the default 1->8->16->16->1 architecture (3x3 kernels) with seeded
/// uniform +-sqrt(6/(fan_in+fan_out)) init.
TinyFCN make_tiny_fcn(std::uint64_t init_seed);
TinyFCN make_tiny_fcn(const std::vector<int>& channels, int kernel, std::uint64_t init_seed);

/// Per-pixel sigmoid probabilities; output dims equal input dims.
ProbMap forward(const TinyFCN& model, const Frame& frame);

/// Mean BCE over non-IGNORE pixels with exact-zero gradient at IGNORE pixels.
/// Returns the loss and d(loss)/d(logit) per pixel.
struct MaskedLoss {
  double loss = 0.0;
  std::vector<double> grad_wrt_logits;
};
MaskedLoss masked_bce_loss(const std::vector<double>& probs, const Mask& labels);

/// Loss and analytic parameter gradients of masked BCE on one frame.
struct LossAndGrads {
  double loss = 0.0;
  ModelGrads grads;
};
LossAndGrads loss_and_gradients(const TinyFCN& model, const Frame& frame, const Mask& labels);

/// dL/dlogits of BCE(frame_score, frame label) on one logit grid; the
/// subgradient of the max routes all gradient to the arg-max entry.
std::vector<double> frame_bce_logit_grads(const std::vector<double>& logits, bool positive,
                                          double* loss = nullptr);

/// Classic momentum update in place: v <- momentum*v - lr*g; p <- p + v.
void sgd_step(TinyFCN& model, const ModelGrads& grads, double lr, double momentum);

/// Maximum pixel probability.
double frame_score(const ProbMap& probs);

/// Maximum frame score.
double stack_score(const std::vector<double>& frame_scores);

/// One pseudo-labeled training sample: a corpus frame plus its trinarized map.
struct TrainingSample {
  Frame frame;
  Mask mask;
};

using TrainingSet = std::vector<TrainingSample>;

/// Loads every (frame, mask) pair of a dataset into memory.
TrainingSet load_training_set(const DatasetManifest& manifest);

struct TrainHooks {
  // Called once per minibatch with (labeled crops, pseudo crops).
  std::function<void(int, int)> on_minibatch;
};

/// Noised student/teacher training on a labeled set plus an optional
/// pseudo-labeled set, with round(B*mix) labeled crops per minibatch.
/// Deterministic given cfg.seed. Mutates `model` in place.
void train(TinyFCN& model, const TrainingSet& labeled, const TrainingSet* pseudo,
           const TrainConfig& cfg, const TrainHooks* hooks = nullptr);

/// Frame Oracle variant: corpus samples carry only a frame-level binary label;
/// their loss is BCE(frame_score, label) with gradient at the arg-max pixel.
struct FrameLabeledSample {
  Frame frame;
  bool positive = false;
};
void train_frame_oracle(TinyFCN& model, const TrainingSet& labeled,
                        const std::vector<FrameLabeledSample>& corpus, const TrainConfig& cfg);

// Checkpoint format: magic "NSC1", u32 layer count, per layer u32
// out_ch/in_ch/kh/kw, then all parameters as f32 LE in layer order
// (weights then bias), then the TrainConfig fields.
void save_checkpoint(const TinyFCN& model, const TrainConfig& cfg,
                     const std::filesystem::path& path);
struct Checkpoint {
  TinyFCN model;
  TrainConfig config;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ns
