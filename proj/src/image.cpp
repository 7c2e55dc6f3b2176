#include "ns/image.hpp"

#include <algorithm>

#include "ns/binio.hpp"

namespace ns {
namespace {

void check_dims(int height, int width, const std::filesystem::path& path) {
  // 1<<14 per side keeps allocations bounded when reading untrusted files.
  if (height < 1 || width < 1 || height > (1 << 14) || width > (1 << 14))
    throw FormatError("implausible dimensions in " + path.string());
}

}  // namespace

bool Mask::any_positive() const {
  return std::find(labels.begin(), labels.end(), kLabelPos) != labels.end();
}

Frame make_frame(int height, int width, double fill) {
  Frame f;
  f.height = height;
  f.width = width;
  f.intensities.assign(static_cast<std::size_t>(height) * width, fill);
  return f;
}

Mask make_mask(int height, int width, std::uint8_t fill) {
  Mask m;
  m.height = height;
  m.width = width;
  m.labels.assign(static_cast<std::size_t>(height) * width, fill);
  return m;
}

void validate_frame(const Frame& frame) {
  if (frame.height < 8 || frame.width < 8)
    throw ParameterError("frame dimensions must be at least 8x8");
  if (frame.intensities.size() != static_cast<std::size_t>(frame.height) * frame.width)
    throw ParameterError("frame buffer size does not match dimensions");
  for (double v : frame.intensities)
    if (!(v >= 0.0 && v <= 1.0)) throw ParameterError("frame intensity outside [0,1]");
}

void validate_mask_dims(const Frame& frame, const Mask& mask) {
  if (frame.height != mask.height || frame.width != mask.width)
    throw ParameterError("mask dimensions do not match frame");
}

void save_frame(const Frame& frame, const std::filesystem::path& path) {
  ByteWriter w;
  w.reserve(12 + frame.intensities.size() * 4);
  w.magic("NSF1");
  w.u32(static_cast<std::uint32_t>(frame.height));
  w.u32(static_cast<std::uint32_t>(frame.width));
  for (double v : frame.intensities) w.f32(static_cast<float>(v));
  w.save(path);
}

Frame load_frame(const std::filesystem::path& path) {
  ByteReader r(path);
  r.expect_magic("NSF1");
  Frame f;
  f.height = static_cast<int>(r.u32());
  f.width = static_cast<int>(r.u32());
  check_dims(f.height, f.width, path);
  f.intensities.resize(static_cast<std::size_t>(f.height) * f.width);
  for (double& v : f.intensities) v = r.f32();
  return f;
}

void save_mask(const Mask& mask, const std::filesystem::path& path) {
  ByteWriter w;
  w.reserve(12 + mask.labels.size());
  w.magic("NSM1");
  w.u32(static_cast<std::uint32_t>(mask.height));
  w.u32(static_cast<std::uint32_t>(mask.width));
  w.raw(mask.labels.data(), mask.labels.size());
  w.save(path);
}

Mask load_mask(const std::filesystem::path& path) {
  ByteReader r(path);
  r.expect_magic("NSM1");
  Mask m;
  m.height = static_cast<int>(r.u32());
  m.width = static_cast<int>(r.u32());
  check_dims(m.height, m.width, path);
  m.labels.resize(static_cast<std::size_t>(m.height) * m.width);
  r.read(m.labels.data(), m.labels.size());
  return m;
}

void save_prob_map(const ProbMap& map, const std::filesystem::path& path) {
  ByteWriter w;
  w.reserve(12 + map.probs.size() * 4);
  w.magic("NSP1");
  w.u32(static_cast<std::uint32_t>(map.height));
  w.u32(static_cast<std::uint32_t>(map.width));
  for (float v : map.probs) w.f32(v);
  w.save(path);
}

ProbMap load_prob_map(const std::filesystem::path& path) {
  ByteReader r(path);
  r.expect_magic("NSP1");
  ProbMap p;
  p.height = static_cast<int>(r.u32());
  p.width = static_cast<int>(r.u32());
  check_dims(p.height, p.width, path);
  p.probs.resize(static_cast<std::size_t>(p.height) * p.width);
  for (float& v : p.probs) v = r.f32();
  return p;
}

}  // namespace ns
