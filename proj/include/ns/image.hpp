#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ns/common.hpp"

namespace ns {

// Pixel label alphabet shared by ground-truth masks and pseudo-labels.
inline constexpr std::uint8_t kLabelNeg = 0;
inline constexpr std::uint8_t kLabelPos = 1;
inline constexpr std::uint8_t kLabelIgnore = 255;

/// A 2D scalar-intensity image with values in [0, 1], row-major.
struct Frame {
  int height = 0;
  int width = 0;
  std::vector<double> intensities;

  double at(int r, int c) const { return intensities[static_cast<std::size_t>(r) * width + c]; }
  double& at(int r, int c) { return intensities[static_cast<std::size_t>(r) * width + c]; }
  std::size_t pixel_count() const { return intensities.size(); }
};

/// Per-pixel label grid over {NEG, POS, IGNORE}, paired with a Frame.
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> labels;

  std::uint8_t at(int r, int c) const { return labels[static_cast<std::size_t>(r) * width + c]; }
  std::uint8_t& at(int r, int c) { return labels[static_cast<std::size_t>(r) * width + c]; }
  bool any_positive() const;
};

/// Per-pixel probability map produced by the model, dimensions match the input.
struct ProbMap {
  int height = 0;
  int width = 0;
  std::vector<float> probs;

  float at(int r, int c) const { return probs[static_cast<std::size_t>(r) * width + c]; }
};

struct FramePair {
  Frame frame;
  Mask mask;
};

/// One exam: an ordered list of frames with masks and provenance metadata.
struct Stack {
  std::string stack_id;
  std::vector<FramePair> frames;
  std::string domain_id;
  bool positive = false;
};

Frame make_frame(int height, int width, double fill = 0.0);
Mask make_mask(int height, int width, std::uint8_t fill = kLabelNeg);

void validate_frame(const Frame& frame);
void validate_mask_dims(const Frame& frame, const Mask& mask);

// Binary file formats. Frame: magic "NSF1", u32 LE height, u32 LE width,
// then height*width f32 LE row-major. Mask: magic "NSM1", same header, then
// height*width bytes. ProbMap: magic "NSP1", same layout as frames.
void save_frame(const Frame& frame, const std::filesystem::path& path);
Frame load_frame(const std::filesystem::path& path);
void save_mask(const Mask& mask, const std::filesystem::path& path);
Mask load_mask(const std::filesystem::path& path);
void save_prob_map(const ProbMap& map, const std::filesystem::path& path);
ProbMap load_prob_map(const std::filesystem::path& path);

}  // namespace ns
