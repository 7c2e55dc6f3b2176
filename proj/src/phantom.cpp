#include "ns/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ns/textio.hpp"

namespace ns {
namespace {

constexpr double kTwoPi = 6.28318530717958647692;
// A blob pixel is POS where its gaussian contribution exceeds half the peak
// amplitude, i.e. within sqrt(2 ln 2) standard deviations of the center.
const double kHalfPeakSigmas = std::sqrt(2.0 * std::log(2.0));

struct Lesion {
  double cy, cx;
  double sigma;
  double amplitude;
};

std::string frame_file(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "f%04d.nsf", index);
  return buf;
}

std::string mask_file(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "m%04d.nsm", index);
  return buf;
}

}  // namespace

void validate_profile(const DomainProfile& p) {
  if (!(p.lesion_rate >= 0.0 && p.lesion_rate <= 1.0))
    throw ParameterError("lesion_rate must be in [0,1]");
  if (!(p.noise_sigma >= 0.0)) throw ParameterError("noise_sigma must be >= 0");
  if (!(p.head_scale > 0.0 && p.head_scale <= 0.5))
    throw ParameterError("head_scale must be in (0, 0.5]");
  if (p.frame_height < 8 || p.frame_width < 8)
    throw ParameterError("frame dimensions must be at least 8x8");
  if (p.frames_per_stack < 1) throw ParameterError("frames_per_stack must be >= 1");
  if (!(p.contrast_bias > 0.0)) throw ParameterError("contrast_bias must be > 0");
  if (!(p.lesion_brightness > 0.0)) throw ParameterError("lesion_brightness must be > 0");
}

DomainProfile profile_from_doc(const KeyValueDoc& doc) {
  DomainProfile p;
  p.domain_id = doc.get_or("profile.domain_id", p.domain_id);
  p.noise_sigma = doc.get_double("profile.noise_sigma");
  p.contrast_bias = doc.get_double("profile.contrast_bias");
  p.head_scale = doc.get_double("profile.head_scale");
  p.lesion_rate = doc.get_double("profile.lesion_rate");
  p.lesion_brightness = doc.get_double("profile.lesion_brightness");
  p.frame_height = static_cast<int>(doc.get_int("profile.frame_height"));
  p.frame_width = static_cast<int>(doc.get_int("profile.frame_width"));
  p.frames_per_stack = static_cast<int>(doc.get_int("profile.frames_per_stack"));
  validate_profile(p);
  return p;
}

void profile_to_doc(const DomainProfile& p, KeyValueDoc& doc) {
  doc.add("profile.domain_id", p.domain_id);
  doc.add_double("profile.noise_sigma", p.noise_sigma);
  doc.add_double("profile.contrast_bias", p.contrast_bias);
  doc.add_double("profile.head_scale", p.head_scale);
  doc.add_double("profile.lesion_rate", p.lesion_rate);
  doc.add_double("profile.lesion_brightness", p.lesion_brightness);
  doc.add_int("profile.frame_height", p.frame_height);
  doc.add_int("profile.frame_width", p.frame_width);
  doc.add_int("profile.frames_per_stack", p.frames_per_stack);
}

DomainProfile load_profile(const std::filesystem::path& path) {
  return profile_from_doc(KeyValueDoc::load(path));
}

Stack generate_stack(const DomainProfile& profile, std::uint64_t seed,
                     const std::string& stack_id) {
  validate_profile(profile);
  Rng rng(seed);

  Stack stack;
  stack.stack_id = stack_id;
  stack.domain_id = profile.domain_id;
  stack.frames.reserve(profile.frames_per_stack);

  const int h = profile.frame_height;
  const int w = profile.frame_width;

  for (int fi = 0; fi < profile.frames_per_stack; ++fi) {
    // Head geometry with mild per-frame jitter.
    const double cy = 0.5 * (h - 1) + rng.uniform(-1.5, 1.5);
    const double cx = 0.5 * (w - 1) + rng.uniform(-1.5, 1.5);
    const double ry = profile.head_scale * h * (1.0 + rng.uniform(-0.08, 0.08));
    const double rx = profile.head_scale * w * (1.0 + rng.uniform(-0.08, 0.08));
    const double texture_phase = rng.uniform(0.0, kTwoPi);

    std::vector<Lesion> lesions;
    if (rng.bernoulli(profile.lesion_rate)) {
      const int n_lesions = 1 + (rng.bernoulli(0.3) ? 1 : 0);
      // Keep lesion centers inside the ellipse shrunk by the worst-case POS
      // footprint so every POS pixel stays inside the head.
      const double margin = kHalfPeakSigmas * 4.0 + 1.0;
      const double sry = std::max(0.5, ry - margin);
      const double srx = std::max(0.5, rx - margin);
      for (int li = 0; li < n_lesions; ++li) {
        const double angle = rng.uniform(0.0, kTwoPi);
        const double radial = std::sqrt(rng.next_double());
        const double radius = rng.uniform(2.0, 8.0);
        const double amplitude = profile.lesion_brightness * (1.0 + rng.uniform(-0.2, 0.2));
        Lesion l;
        l.cy = cy + radial * sry * std::sin(angle);
        l.cx = cx + radial * srx * std::cos(angle);
        l.sigma = 0.5 * radius;
        l.amplitude = amplitude;
        lesions.push_back(l);
      }
    }

    Frame frame = make_frame(h, w);
    Mask mask = make_mask(h, w, kLabelNeg);

    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const double dy = (r - cy) / ry;
        const double dx = (c - cx) / rx;
        const double rho2 = dy * dy + dx * dx;

        double v = 0.04;  // air
        bool inside_head = rho2 <= 1.0;
        if (inside_head) {
          if (rho2 > 0.88 * 0.88) {
            v = 0.85;  // skull rim
          } else {
            v = 0.42 + 0.10 * (1.0 - rho2) +
                0.02 * std::sin(texture_phase + 0.35 * r + 0.21 * c);
          }
        }

        bool pos = false;
        for (const Lesion& l : lesions) {
          const double ddy = r - l.cy;
          const double ddx = c - l.cx;
          const double d2 = ddy * ddy + ddx * ddx;
          v += l.amplitude * std::exp(-d2 / (2.0 * l.sigma * l.sigma));
          const double cut = kHalfPeakSigmas * l.sigma;
          if (d2 < cut * cut) pos = true;
        }

        v = std::pow(std::clamp(v, 0.0, 1.0), profile.contrast_bias);
        v += profile.noise_sigma * rng.gaussian();
        frame.at(r, c) = std::clamp(v, 0.0, 1.0);
        if (pos && inside_head) mask.at(r, c) = kLabelPos;
      }
    }

    if (mask.any_positive()) stack.positive = true;
    stack.frames.push_back(FramePair{std::move(frame), std::move(mask)});
  }

  return stack;
}

DatasetManifest generate_corpus(const DomainProfile& profile, int n_stacks, std::uint64_t seed,
                                const std::string& dataset_id,
                                const std::filesystem::path& out_dir) {
  validate_profile(profile);
  if (n_stacks < 1) throw ParameterError("n_stacks must be >= 1");

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw StorageError("cannot create output directory: " + out_dir.string());

  DatasetManifest manifest;
  manifest.dataset_id = dataset_id;
  manifest.seed = seed;
  manifest.profile = profile;
  manifest.base_dir = out_dir;

  for (int i = 0; i < n_stacks; ++i) {
    char id_buf[32];
    std::snprintf(id_buf, sizeof(id_buf), "s%05d", i);
    const std::string stack_id = dataset_id + "_" + id_buf;
    const Stack stack = generate_stack(profile, derive_seed(seed, static_cast<std::uint64_t>(i)),
                                       stack_id);

    const std::filesystem::path stack_dir = out_dir / stack_id;
    std::filesystem::create_directories(stack_dir, ec);
    if (ec) throw StorageError("cannot create stack directory: " + stack_dir.string());

    for (int fi = 0; fi < static_cast<int>(stack.frames.size()); ++fi) {
      save_frame(stack.frames[fi].frame, stack_dir / frame_file(fi));
      save_mask(stack.frames[fi].mask, stack_dir / mask_file(fi));
    }

    StackDescriptor sd;
    sd.stack_id = stack_id;
    sd.domain_id = stack.domain_id;
    sd.frame_count = static_cast<int>(stack.frames.size());
    sd.rel_dir = stack_id;
    manifest.stacks.push_back(std::move(sd));
  }

  save_manifest(manifest, out_dir / "manifest.txt");
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  KeyValueDoc doc;
  doc.add("dataset_id", manifest.dataset_id);
  doc.add("seed", std::to_string(manifest.seed));
  profile_to_doc(manifest.profile, doc);
  for (const StackDescriptor& sd : manifest.stacks) {
    doc.add("stack", sd.stack_id + " " + sd.domain_id + " " + std::to_string(sd.frame_count) +
                         " " + sd.rel_dir);
  }
  doc.save(path);
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  KeyValueDoc doc = KeyValueDoc::load(path);
  DatasetManifest manifest;
  manifest.dataset_id = doc.get("dataset_id");
  manifest.seed = doc.get_u64("seed");
  manifest.profile = profile_from_doc(doc);
  manifest.base_dir = path.parent_path();

  std::set<std::string> ids;
  for (const std::string& line : doc.get_all("stack")) {
    auto fields = split_fields(line);
    if (fields.size() != 4) throw FormatError("bad stack record in " + path.string());
    StackDescriptor sd;
    sd.stack_id = fields[0];
    sd.domain_id = fields[1];
    sd.frame_count = std::stoi(fields[2]);
    sd.rel_dir = fields[3];
    if (!ids.insert(sd.stack_id).second)
      throw FormatError("duplicate stack id " + sd.stack_id + " in " + path.string());
    const auto dir = manifest.stack_dir(sd);
    for (int fi = 0; fi < sd.frame_count; ++fi) {
      if (!std::filesystem::exists(dir / frame_file(fi)) ||
          !std::filesystem::exists(dir / mask_file(fi)))
        throw StorageError("missing files for stack " + sd.stack_id + " under " + dir.string());
    }
    manifest.stacks.push_back(std::move(sd));
  }
  if (manifest.stacks.empty()) throw FormatError("manifest lists no stacks: " + path.string());
  return manifest;
}

Stack load_stack(const DatasetManifest& manifest, const StackDescriptor& sd) {
  Stack stack;
  stack.stack_id = sd.stack_id;
  stack.domain_id = sd.domain_id;
  const auto dir = manifest.stack_dir(sd);
  stack.frames.reserve(sd.frame_count);
  for (int fi = 0; fi < sd.frame_count; ++fi) {
    FramePair pair;
    pair.frame = load_frame(dir / frame_file(fi));
    pair.mask = load_mask(dir / mask_file(fi));
    if (pair.mask.any_positive()) stack.positive = true;
    stack.frames.push_back(std::move(pair));
  }
  return stack;
}

}  // namespace ns
