#pragma once

#include <utility>

#include "ns/common.hpp"
#include "ns/image.hpp"

namespace ns {

enum class ContrastKind { PowerLaw, LogCorrection, None };

/// Which contrast transforms sample_augmentation may pick. kAll is the
/// standard one-of-three scheme; the others drive the contrast ablation grid.
enum class ContrastPolicy { kAll, kNone, kPowerOnly, kLogOnly };

/// One drawn noising decision for a single training sample. All parameters
/// are drawn on every call regardless of the chosen contrast kind.
struct AugmentationChoice {
  ContrastKind contrast_kind = ContrastKind::None;
  double gamma = 1.0;  // used when PowerLaw
  double gain = 1.0;   // used when LogCorrection
  double alpha = 0.0;  // height jitter
  double beta = 0.0;   // width jitter
};

/// O = I^gamma per pixel. gamma must be > 0.
Frame power_law(const Frame& frame, double gamma);

/// O = gain * ln(1 + I) per pixel, clamped to [0,1]. gain must be > 0.
Frame log_correction(const Frame& frame, double gain);

/// Resizes to round(h*(1-alpha)) x round(w*(1-beta)); bilinear for the frame,
/// nearest-neighbor for the mask. Exact pass-through when dims are unchanged.
std::pair<Frame, Mask> scale_jitter(const Frame& frame, const Mask& mask, double alpha,
                                    double beta);

/// Draws contrast kind (1/3 each under kAll), gamma ~ U(0.85, 1.1),
/// gain ~ U(0.7, 1.1), alpha, beta ~ U(-0.075, 0.075), all independently.
AugmentationChoice sample_augmentation(Rng& rng, ContrastPolicy policy = ContrastPolicy::kAll);

/// Applies the contrast and scale parts of a choice to a training pair.
std::pair<Frame, Mask> apply_augmentation(const Frame& frame, const Mask& mask,
                                          const AugmentationChoice& choice);

}  // namespace ns
