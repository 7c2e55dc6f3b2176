#include "ns/model.hpp"

#include <algorithm>
#include <cmath>

#include "ns/binio.hpp"

namespace ns {
namespace {

constexpr double kLeakySlope = 0.01;
constexpr double kProbEps = 1e-7;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::size_t plane(int h, int w) { return static_cast<std::size_t>(h) * w; }

/// Same-padding convolution: in [in_ch][h][w] -> out [out_ch][h][w].
void conv_forward(const ConvLayer& layer, const std::vector<double>& in, int h, int w,
                  std::vector<double>& out) {
  const int ph = (layer.kh - 1) / 2;
  const int pw = (layer.kw - 1) / 2;
  out.assign(static_cast<std::size_t>(layer.out_ch) * plane(h, w), 0.0);

  for (int oc = 0; oc < layer.out_ch; ++oc) {
    double* out_plane = out.data() + static_cast<std::size_t>(oc) * plane(h, w);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        double acc = layer.bias[oc];
        for (int ic = 0; ic < layer.in_ch; ++ic) {
          const double* in_plane = in.data() + static_cast<std::size_t>(ic) * plane(h, w);
          const float* kernel = layer.weights.data() +
                                (static_cast<std::size_t>(oc) * layer.in_ch + ic) * layer.kh *
                                    layer.kw;
          for (int kr = 0; kr < layer.kh; ++kr) {
            const int ir = r + kr - ph;
            if (ir < 0 || ir >= h) continue;
            for (int kc = 0; kc < layer.kw; ++kc) {
              const int ic2 = c + kc - pw;
              if (ic2 < 0 || ic2 >= w) continue;
              acc += static_cast<double>(kernel[kr * layer.kw + kc]) * in_plane[ir * w + ic2];
            }
          }
        }
        out_plane[r * w + c] = acc;
      }
    }
  }
}

struct ForwardCache {
  std::vector<std::vector<double>> inputs;  // inputs[l] = activations entering layer l
  std::vector<std::vector<double>> pre;     // pre[l] = pre-activation outputs of layer l
};

std::vector<double> forward_logits(const TinyFCN& model, std::vector<double> input, int h, int w,
                                   ForwardCache* cache) {
  const std::size_t n_layers = model.layers.size();
  std::vector<double> pre;
  for (std::size_t l = 0; l < n_layers; ++l) {
    if (cache) cache->inputs.push_back(input);
    conv_forward(model.layers[l], input, h, w, pre);
    if (cache) cache->pre.push_back(pre);
    if (l + 1 < n_layers) {
      input.resize(pre.size());
      for (std::size_t i = 0; i < pre.size(); ++i)
        input[i] = pre[i] > 0.0 ? pre[i] : kLeakySlope * pre[i];
    }
  }
  return pre;
}

ModelGrads zero_grads(const TinyFCN& model) {
  ModelGrads grads(model.layers.size());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    grads[l].weights.assign(model.layers[l].weight_count(), 0.0);
    grads[l].bias.assign(model.layers[l].out_ch, 0.0);
  }
  return grads;
}

/// Accumulates parameter gradients for one sample given dL/dlogits.
void backward(const TinyFCN& model, const ForwardCache& cache, int h, int w,
              std::vector<double> delta, ModelGrads& grads) {
  const std::size_t np = plane(h, w);
  for (int l = static_cast<int>(model.layers.size()) - 1; l >= 0; --l) {
    const ConvLayer& layer = model.layers[l];
    const std::vector<double>& input = cache.inputs[l];
    const int ph = (layer.kh - 1) / 2;
    const int pw = (layer.kw - 1) / 2;

    for (int oc = 0; oc < layer.out_ch; ++oc) {
      const double* dplane = delta.data() + static_cast<std::size_t>(oc) * np;
      double bias_acc = 0.0;
      for (std::size_t i = 0; i < np; ++i) bias_acc += dplane[i];
      grads[l].bias[oc] += bias_acc;

      for (int ic = 0; ic < layer.in_ch; ++ic) {
        const double* in_plane = input.data() + static_cast<std::size_t>(ic) * np;
        double* gkernel = grads[l].weights.data() +
                          (static_cast<std::size_t>(oc) * layer.in_ch + ic) * layer.kh * layer.kw;
        for (int kr = 0; kr < layer.kh; ++kr) {
          for (int kc = 0; kc < layer.kw; ++kc) {
            double acc = 0.0;
            for (int r = 0; r < h; ++r) {
              const int ir = r + kr - ph;
              if (ir < 0 || ir >= h) continue;
              for (int c = 0; c < w; ++c) {
                const int icc = c + kc - pw;
                if (icc < 0 || icc >= w) continue;
                acc += dplane[r * w + c] * in_plane[ir * w + icc];
              }
            }
            gkernel[kr * layer.kw + kc] += acc;
          }
        }
      }
    }

    if (l == 0) break;

    // dL/d(input of layer l), then through the leaky rectifier of layer l-1.
    std::vector<double> dinput(static_cast<std::size_t>(layer.in_ch) * np, 0.0);
    for (int oc = 0; oc < layer.out_ch; ++oc) {
      const double* dplane = delta.data() + static_cast<std::size_t>(oc) * np;
      for (int ic = 0; ic < layer.in_ch; ++ic) {
        double* din_plane = dinput.data() + static_cast<std::size_t>(ic) * np;
        const float* kernel = layer.weights.data() +
                              (static_cast<std::size_t>(oc) * layer.in_ch + ic) * layer.kh *
                                  layer.kw;
        for (int r = 0; r < h; ++r) {
          for (int c = 0; c < w; ++c) {
            const double d = dplane[r * w + c];
            if (d == 0.0) continue;
            for (int kr = 0; kr < layer.kh; ++kr) {
              const int ir = r + kr - ph;
              if (ir < 0 || ir >= h) continue;
              for (int kc = 0; kc < layer.kw; ++kc) {
                const int icc = c + kc - pw;
                if (icc < 0 || icc >= w) continue;
                din_plane[ir * w + icc] +=
                    d * static_cast<double>(kernel[kr * layer.kw + kc]);
              }
            }
          }
        }
      }
    }

    const std::vector<double>& prev_pre = cache.pre[l - 1];
    delta.resize(dinput.size());
    for (std::size_t i = 0; i < dinput.size(); ++i)
      delta[i] = dinput[i] * (prev_pre[i] > 0.0 ? 1.0 : kLeakySlope);
  }
}

std::vector<double> frame_to_double(const Frame& frame) { return frame.intensities; }

void check_model(const TinyFCN& model) {
  if (model.layers.empty()) throw ParameterError("model has no layers");
  if (model.layers.back().out_ch != 1)
    throw ParameterError("final layer must have exactly 1 output channel");
  if (model.layers.front().in_ch != 1)
    throw ParameterError("first layer must take 1 input channel");
  int prev = model.layers.front().in_ch;
  for (const ConvLayer& layer : model.layers) {
    if (layer.in_ch != prev) throw ParameterError("layer channel mismatch");
    if (layer.kh % 2 == 0 || layer.kw % 2 == 0)
      throw ParameterError("kernels must be odd-sized for same padding");
    if (layer.weights.size() != layer.weight_count() ||
        layer.bias.size() != static_cast<std::size_t>(layer.out_ch))
      throw ParameterError("parameter buffer size mismatch");
    prev = layer.out_ch;
  }
}

}  // namespace

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ParameterError("epochs must be >= 1");
  if (cfg.batch_size < 1) throw ParameterError("batch_size must be >= 1");
  if (cfg.crop_size < 1) throw ParameterError("crop_size must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw ParameterError("learning_rate must be > 0");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0))
    throw ParameterError("momentum must be in [0,1)");
  if (!(cfg.mix_ratio_labeled >= 0.0 && cfg.mix_ratio_labeled <= 1.0))
    throw ParameterError("mix_ratio_labeled must be in [0,1]");
}

TinyFCN make_tiny_fcn(std::uint64_t init_seed) {
  return make_tiny_fcn({1, 8, 16, 16, 1}, 3, init_seed);
}

TinyFCN make_tiny_fcn(const std::vector<int>& channels, int kernel, std::uint64_t init_seed) {
  if (channels.size() < 2) throw ParameterError("need at least one layer");
  Rng rng(init_seed);
  TinyFCN model;
  for (std::size_t l = 0; l + 1 < channels.size(); ++l) {
    ConvLayer layer;
    layer.in_ch = channels[l];
    layer.out_ch = channels[l + 1];
    layer.kh = layer.kw = kernel;
    const double fan_in = static_cast<double>(layer.in_ch) * kernel * kernel;
    const double fan_out = static_cast<double>(layer.out_ch) * kernel * kernel;
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    layer.weights.resize(layer.weight_count());
    for (float& v : layer.weights) v = static_cast<float>(rng.uniform(-limit, limit));
    layer.bias.assign(layer.out_ch, 0.0f);
    layer.vel_weights.assign(layer.weight_count(), 0.0f);
    layer.vel_bias.assign(layer.out_ch, 0.0f);
    model.layers.push_back(std::move(layer));
  }
  check_model(model);
  return model;
}

ProbMap forward(const TinyFCN& model, const Frame& frame) {
  check_model(model);
  const std::vector<double> logits =
      forward_logits(model, frame_to_double(frame), frame.height, frame.width, nullptr);
  ProbMap out;
  out.height = frame.height;
  out.width = frame.width;
  out.probs.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(logits[i])) throw NumericError("non-finite logit in forward pass");
    // Keep stored probabilities strictly inside (0,1) even after the f32 cast.
    out.probs[i] = static_cast<float>(std::clamp(sigmoid(logits[i]), 1e-6, 1.0 - 1e-6));
  }
  return out;
}

MaskedLoss masked_bce_loss(const std::vector<double>& probs, const Mask& labels) {
  if (probs.size() != labels.labels.size())
    throw ParameterError("probability and label sizes differ");
  MaskedLoss out;
  out.grad_wrt_logits.assign(probs.size(), 0.0);

  std::size_t n_valid = 0;
  for (std::uint8_t l : labels.labels)
    if (l != kLabelIgnore) ++n_valid;
  if (n_valid == 0) return out;  // all ignored: zero loss, zero gradient

  double loss = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (labels.labels[i] == kLabelIgnore) continue;
    const double y = labels.labels[i] == kLabelPos ? 1.0 : 0.0;
    const double p = std::clamp(probs[i], kProbEps, 1.0 - kProbEps);
    loss -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    // d/dlogit of the clamped loss; zero in the clamped regions.
    if (probs[i] > kProbEps && probs[i] < 1.0 - kProbEps)
      out.grad_wrt_logits[i] = (p - y) / static_cast<double>(n_valid);
  }
  out.loss = loss / static_cast<double>(n_valid);
  return out;
}

LossAndGrads loss_and_gradients(const TinyFCN& model, const Frame& frame, const Mask& labels) {
  check_model(model);
  validate_mask_dims(frame, labels);
  ForwardCache cache;
  const std::vector<double> logits =
      forward_logits(model, frame_to_double(frame), frame.height, frame.width, &cache);
  std::vector<double> probs(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) probs[i] = sigmoid(logits[i]);
  MaskedLoss ml = masked_bce_loss(probs, labels);

  LossAndGrads out;
  out.loss = ml.loss;
  out.grads = zero_grads(model);
  backward(model, cache, frame.height, frame.width, std::move(ml.grad_wrt_logits), out.grads);
  return out;
}

std::vector<double> frame_bce_logit_grads(const std::vector<double>& logits, bool positive,
                                          double* loss) {
  if (logits.empty()) throw ParameterError("empty logit grid");
  const auto max_it = std::max_element(logits.begin(), logits.end());
  const double s = std::clamp(sigmoid(*max_it), kProbEps, 1.0 - kProbEps);
  const double y = positive ? 1.0 : 0.0;
  if (loss) *loss = -(y * std::log(s) + (1.0 - y) * std::log(1.0 - s));
  std::vector<double> grads(logits.size(), 0.0);
  grads[static_cast<std::size_t>(max_it - logits.begin())] = s - y;
  return grads;
}

void sgd_step(TinyFCN& model, const ModelGrads& grads, double lr, double momentum) {
  if (grads.size() != model.layers.size()) throw ParameterError("gradient layer count mismatch");
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    ConvLayer& layer = model.layers[l];
    if (grads[l].weights.size() != layer.weights.size() ||
        grads[l].bias.size() != layer.bias.size())
      throw ParameterError("gradient shape mismatch at layer " + std::to_string(l));
    for (double g : grads[l].weights)
      if (!std::isfinite(g)) throw NumericError("non-finite weight gradient");
    for (double g : grads[l].bias)
      if (!std::isfinite(g)) throw NumericError("non-finite bias gradient");

    for (std::size_t i = 0; i < layer.weights.size(); ++i) {
      const double v = momentum * layer.vel_weights[i] - lr * grads[l].weights[i];
      layer.vel_weights[i] = static_cast<float>(v);
      layer.weights[i] = static_cast<float>(layer.weights[i] + v);
    }
    for (std::size_t i = 0; i < layer.bias.size(); ++i) {
      const double v = momentum * layer.vel_bias[i] - lr * grads[l].bias[i];
      layer.vel_bias[i] = static_cast<float>(v);
      layer.bias[i] = static_cast<float>(layer.bias[i] + v);
    }
  }
}

double frame_score(const ProbMap& probs) {
  if (probs.probs.empty()) throw ParameterError("frame_score on empty probability map");
  return *std::max_element(probs.probs.begin(), probs.probs.end());
}

double stack_score(const std::vector<double>& frame_scores) {
  if (frame_scores.empty()) throw ParameterError("stack_score on empty frame list");
  return *std::max_element(frame_scores.begin(), frame_scores.end());
}

TrainingSet load_training_set(const DatasetManifest& manifest) {
  TrainingSet out;
  for (const StackDescriptor& sd : manifest.stacks) {
    Stack stack = load_stack(manifest, sd);
    for (FramePair& fp : stack.frames)
      out.push_back(TrainingSample{std::move(fp.frame), std::move(fp.mask)});
  }
  return out;
}

namespace {

struct Crop {
  std::vector<double> pixels;
  Mask mask;
};

Crop cut_crop(const Frame& frame, const Mask& mask, int top, int left, int size) {
  Crop crop;
  crop.pixels.resize(static_cast<std::size_t>(size) * size);
  crop.mask = make_mask(size, size);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      crop.pixels[static_cast<std::size_t>(r) * size + c] = frame.at(top + r, left + c);
      crop.mask.at(r, c) = mask.at(top + r, left + c);
    }
  return crop;
}

int uniform_int(Rng& rng, int lo, int hi) {  // inclusive bounds
  return lo + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(hi - lo + 1)));
}

/// Augments one training pair and cuts a crop. When force_positive and the
/// augmented mask has POS pixels, the window is chosen around one of them.
Crop sample_crop(const TrainingSample& sample, bool force_positive, const TrainConfig& cfg,
                 Rng& aug_rng, Rng& sel_rng) {
  const AugmentationChoice choice = sample_augmentation(aug_rng, cfg.contrast_policy);
  auto [frame, mask] = apply_augmentation(sample.frame, sample.mask, choice);
  if (frame.height < cfg.crop_size || frame.width < cfg.crop_size)
    throw ParameterError("crop_size exceeds augmented frame dimensions");

  int top, left;
  std::vector<int> pos_indices;
  if (force_positive) {
    for (std::size_t i = 0; i < mask.labels.size(); ++i)
      if (mask.labels[i] == kLabelPos) pos_indices.push_back(static_cast<int>(i));
  }
  if (!pos_indices.empty()) {
    const int pick = pos_indices[static_cast<std::size_t>(
        sel_rng.next_below(pos_indices.size()))];
    const int pr = pick / mask.width;
    const int pc = pick % mask.width;
    top = uniform_int(sel_rng, std::max(0, pr - cfg.crop_size + 1),
                      std::min(frame.height - cfg.crop_size, pr));
    left = uniform_int(sel_rng, std::max(0, pc - cfg.crop_size + 1),
                       std::min(frame.width - cfg.crop_size, pc));
  } else {
    top = uniform_int(sel_rng, 0, frame.height - cfg.crop_size);
    left = uniform_int(sel_rng, 0, frame.width - cfg.crop_size);
  }
  return cut_crop(frame, mask, top, left, cfg.crop_size);
}

int steps_per_epoch(std::size_t n_labeled, int batch_size) {
  return std::max<int>(1, static_cast<int>((n_labeled + batch_size - 1) / batch_size));
}

void accumulate_crop_loss(const TinyFCN& model, const Crop& crop, int size, double batch_scale,
                          ModelGrads& grads) {
  ForwardCache cache;
  const std::vector<double> logits = forward_logits(model, crop.pixels, size, size, &cache);
  std::vector<double> probs(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) probs[i] = sigmoid(logits[i]);
  MaskedLoss ml = masked_bce_loss(probs, crop.mask);
  for (double& g : ml.grad_wrt_logits) g *= batch_scale;
  backward(model, cache, size, size, std::move(ml.grad_wrt_logits), grads);
}

}  // namespace

void train(TinyFCN& model, const TrainingSet& labeled, const TrainingSet* pseudo,
           const TrainConfig& cfg, const TrainHooks* hooks) {
  validate_train_config(cfg);
  check_model(model);
  if (labeled.empty()) throw ParameterError("labeled training set is empty");

  const bool have_pseudo = pseudo != nullptr && !pseudo->empty();
  const double mix = have_pseudo ? cfg.mix_ratio_labeled : 1.0;
  const int n_lab = static_cast<int>(std::lround(cfg.batch_size * mix));
  const int n_pse = cfg.batch_size - n_lab;

  std::vector<std::size_t> positive_frames;
  for (std::size_t i = 0; i < labeled.size(); ++i)
    if (labeled[i].mask.any_positive()) positive_frames.push_back(i);

  Rng aug_rng(derive_stream_seed(cfg.seed, "augment"));
  Rng sel_rng(derive_stream_seed(cfg.seed, "select"));

  const int steps = steps_per_epoch(labeled.size(), cfg.batch_size);
  const double batch_scale = 1.0 / cfg.batch_size;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int step = 0; step < steps; ++step) {
      ModelGrads grads = zero_grads(model);

      for (int i = 0; i < n_lab; ++i) {
        // Lesions are tiny; half the labeled draws target a POS-containing crop.
        const bool oversample = sel_rng.bernoulli(0.5) && !positive_frames.empty();
        const std::size_t idx =
            oversample
                ? positive_frames[static_cast<std::size_t>(
                      sel_rng.next_below(positive_frames.size()))]
                : static_cast<std::size_t>(sel_rng.next_below(labeled.size()));
        const Crop crop = sample_crop(labeled[idx], oversample, cfg, aug_rng, sel_rng);
        accumulate_crop_loss(model, crop, cfg.crop_size, batch_scale, grads);
      }

      for (int i = 0; i < n_pse; ++i) {
        const std::size_t idx = static_cast<std::size_t>(sel_rng.next_below(pseudo->size()));
        const Crop crop = sample_crop((*pseudo)[idx], false, cfg, aug_rng, sel_rng);
        accumulate_crop_loss(model, crop, cfg.crop_size, batch_scale, grads);
      }

      sgd_step(model, grads, cfg.learning_rate, cfg.momentum);
      if (hooks && hooks->on_minibatch) hooks->on_minibatch(n_lab, n_pse);
    }
  }
}

void train_frame_oracle(TinyFCN& model, const TrainingSet& labeled,
                        const std::vector<FrameLabeledSample>& corpus, const TrainConfig& cfg) {
  validate_train_config(cfg);
  check_model(model);
  if (labeled.empty()) throw ParameterError("labeled training set is empty");
  if (corpus.empty()) throw ParameterError("frame-labeled corpus is empty");

  const int n_lab = static_cast<int>(std::lround(cfg.batch_size * cfg.mix_ratio_labeled));
  const int n_cor = cfg.batch_size - n_lab;

  std::vector<std::size_t> positive_frames;
  for (std::size_t i = 0; i < labeled.size(); ++i)
    if (labeled[i].mask.any_positive()) positive_frames.push_back(i);

  Rng aug_rng(derive_stream_seed(cfg.seed, "augment"));
  Rng sel_rng(derive_stream_seed(cfg.seed, "select"));

  const int steps = steps_per_epoch(labeled.size(), cfg.batch_size);
  const double batch_scale = 1.0 / cfg.batch_size;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int step = 0; step < steps; ++step) {
      ModelGrads grads = zero_grads(model);

      for (int i = 0; i < n_lab; ++i) {
        const bool oversample = sel_rng.bernoulli(0.5) && !positive_frames.empty();
        const std::size_t idx =
            oversample
                ? positive_frames[static_cast<std::size_t>(
                      sel_rng.next_below(positive_frames.size()))]
                : static_cast<std::size_t>(sel_rng.next_below(labeled.size()));
        const Crop crop = sample_crop(labeled[idx], oversample, cfg, aug_rng, sel_rng);
        accumulate_crop_loss(model, crop, cfg.crop_size, batch_scale, grads);
      }

      for (int i = 0; i < n_cor; ++i) {
        const std::size_t idx = static_cast<std::size_t>(sel_rng.next_below(corpus.size()));
        const FrameLabeledSample& fs = corpus[idx];
        const Mask dummy = make_mask(fs.frame.height, fs.frame.width, kLabelNeg);
        const TrainingSample view{fs.frame, dummy};
        const Crop crop = sample_crop(view, false, cfg, aug_rng, sel_rng);

        ForwardCache cache;
        const std::vector<double> logits =
            forward_logits(model, crop.pixels, cfg.crop_size, cfg.crop_size, &cache);
        std::vector<double> dlogits = frame_bce_logit_grads(logits, fs.positive);
        for (double& g : dlogits) g *= batch_scale;
        backward(model, cache, cfg.crop_size, cfg.crop_size, std::move(dlogits), grads);
      }

      sgd_step(model, grads, cfg.learning_rate, cfg.momentum);
    }
  }
}

void save_checkpoint(const TinyFCN& model, const TrainConfig& cfg,
                     const std::filesystem::path& path) {
  check_model(model);
  ByteWriter w;
  w.magic("NSC1");
  w.u32(static_cast<std::uint32_t>(model.layers.size()));
  for (const ConvLayer& layer : model.layers) {
    w.u32(static_cast<std::uint32_t>(layer.out_ch));
    w.u32(static_cast<std::uint32_t>(layer.in_ch));
    w.u32(static_cast<std::uint32_t>(layer.kh));
    w.u32(static_cast<std::uint32_t>(layer.kw));
  }
  for (const ConvLayer& layer : model.layers) {
    for (float v : layer.weights) w.f32(v);
    for (float v : layer.bias) w.f32(v);
  }
  w.u32(static_cast<std::uint32_t>(cfg.epochs));
  w.u32(static_cast<std::uint32_t>(cfg.batch_size));
  w.u32(static_cast<std::uint32_t>(cfg.crop_size));
  w.f64(cfg.learning_rate);
  w.f64(cfg.momentum);
  w.f64(cfg.mix_ratio_labeled);
  w.u64(cfg.seed);
  w.u8(static_cast<std::uint8_t>(cfg.contrast_policy));
  w.save(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  ByteReader r(path);
  r.expect_magic("NSC1");
  const std::uint32_t n_layers = r.u32();
  if (n_layers == 0 || n_layers > 64) throw FormatError("implausible layer count in " + path.string());

  Checkpoint ckpt;
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    ConvLayer layer;
    layer.out_ch = static_cast<int>(r.u32());
    layer.in_ch = static_cast<int>(r.u32());
    layer.kh = static_cast<int>(r.u32());
    layer.kw = static_cast<int>(r.u32());
    if (layer.out_ch < 1 || layer.in_ch < 1 || layer.kh < 1 || layer.kw < 1 ||
        layer.out_ch > 4096 || layer.in_ch > 4096 || layer.kh > 31 || layer.kw > 31)
      throw FormatError("implausible layer shape in " + path.string());
    ckpt.model.layers.push_back(std::move(layer));
  }
  for (ConvLayer& layer : ckpt.model.layers) {
    layer.weights.resize(layer.weight_count());
    for (float& v : layer.weights) v = r.f32();
    layer.bias.resize(layer.out_ch);
    for (float& v : layer.bias) v = r.f32();
    layer.vel_weights.assign(layer.weight_count(), 0.0f);
    layer.vel_bias.assign(layer.out_ch, 0.0f);
  }
  ckpt.config.epochs = static_cast<int>(r.u32());
  ckpt.config.batch_size = static_cast<int>(r.u32());
  ckpt.config.crop_size = static_cast<int>(r.u32());
  ckpt.config.learning_rate = r.f64();
  ckpt.config.momentum = r.f64();
  ckpt.config.mix_ratio_labeled = r.f64();
  ckpt.config.seed = r.u64();
  ckpt.config.contrast_policy = static_cast<ContrastPolicy>(r.u8());
  check_model(ckpt.model);
  return ckpt;
}

}  // namespace ns
