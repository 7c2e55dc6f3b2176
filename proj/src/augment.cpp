#include "ns/augment.hpp"

#include <algorithm>
#include <cmath>

namespace ns {
namespace {

int jittered_dim(int dim, double jitter) {
  const double scaled = dim * (1.0 - jitter);
  const int out = static_cast<int>(std::round(scaled));  // half away from zero
  if (out < 1) throw ParameterError("scale_jitter output dimension < 1");
  return out;
}

double source_coord(int out_index, int out_dim, int in_dim) {
  return (out_index + 0.5) * static_cast<double>(in_dim) / out_dim - 0.5;
}

}  // namespace

Frame power_law(const Frame& frame, double gamma) {
  if (!(gamma > 0.0)) throw ParameterError("power_law requires gamma > 0");
  Frame out = frame;
  for (double& v : out.intensities) v = std::pow(v, gamma);
  return out;
}

Frame log_correction(const Frame& frame, double gain) {
  if (!(gain > 0.0)) throw ParameterError("log_correction requires gain > 0");
  Frame out = frame;
  for (double& v : out.intensities) v = std::clamp(gain * std::log1p(v), 0.0, 1.0);
  return out;
}

std::pair<Frame, Mask> scale_jitter(const Frame& frame, const Mask& mask, double alpha,
                                    double beta) {
  if (!(std::abs(alpha) < 1.0 && std::abs(beta) < 1.0))
    throw ParameterError("scale_jitter requires |alpha| < 1 and |beta| < 1");
  validate_mask_dims(frame, mask);

  const int out_h = jittered_dim(frame.height, alpha);
  const int out_w = jittered_dim(frame.width, beta);
  if (out_h == frame.height && out_w == frame.width) return {frame, mask};

  Frame out_frame = make_frame(out_h, out_w);
  Mask out_mask = make_mask(out_h, out_w);

  for (int r = 0; r < out_h; ++r) {
    const double sr = source_coord(r, out_h, frame.height);
    const double src_r = std::clamp(sr, 0.0, static_cast<double>(frame.height - 1));
    const int r0 = static_cast<int>(std::floor(src_r));
    const int r1 = std::min(r0 + 1, frame.height - 1);
    const double fr = src_r - r0;
    const int nn_r = std::clamp(static_cast<int>(std::lround(sr)), 0, frame.height - 1);

    for (int c = 0; c < out_w; ++c) {
      const double sc = source_coord(c, out_w, frame.width);
      const double src_c = std::clamp(sc, 0.0, static_cast<double>(frame.width - 1));
      const int c0 = static_cast<int>(std::floor(src_c));
      const int c1 = std::min(c0 + 1, frame.width - 1);
      const double fc = src_c - c0;

      const double top = (1.0 - fc) * frame.at(r0, c0) + fc * frame.at(r0, c1);
      const double bot = (1.0 - fc) * frame.at(r1, c0) + fc * frame.at(r1, c1);
      out_frame.at(r, c) = (1.0 - fr) * top + fr * bot;

      const int nn_c = std::clamp(static_cast<int>(std::lround(sc)), 0, frame.width - 1);
      out_mask.at(r, c) = mask.at(nn_r, nn_c);
    }
  }

  return {std::move(out_frame), std::move(out_mask)};
}

AugmentationChoice sample_augmentation(Rng& rng, ContrastPolicy policy) {
  AugmentationChoice choice;
  const std::uint64_t pick = rng.next_below(3);
  switch (policy) {
    case ContrastPolicy::kAll:
      choice.contrast_kind = pick == 0   ? ContrastKind::PowerLaw
                             : pick == 1 ? ContrastKind::LogCorrection
                                         : ContrastKind::None;
      break;
    case ContrastPolicy::kNone:
      choice.contrast_kind = ContrastKind::None;
      break;
    case ContrastPolicy::kPowerOnly:
      choice.contrast_kind = ContrastKind::PowerLaw;
      break;
    case ContrastPolicy::kLogOnly:
      choice.contrast_kind = ContrastKind::LogCorrection;
      break;
  }
  choice.gamma = rng.uniform(0.85, 1.1);
  choice.gain = rng.uniform(0.7, 1.1);
  choice.alpha = rng.uniform(-0.075, 0.075);
  choice.beta = rng.uniform(-0.075, 0.075);
  return choice;
}

std::pair<Frame, Mask> apply_augmentation(const Frame& frame, const Mask& mask,
                                          const AugmentationChoice& choice) {
  Frame contrasted;
  switch (choice.contrast_kind) {
    case ContrastKind::PowerLaw:
      contrasted = power_law(frame, choice.gamma);
      break;
    case ContrastKind::LogCorrection:
      contrasted = log_correction(frame, choice.gain);
      break;
    case ContrastKind::None:
      contrasted = frame;
      break;
  }
  return scale_jitter(contrasted, mask, choice.alpha, choice.beta);
}

}  // namespace ns
