#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ns/image.hpp"

namespace ns {

/// Generation knobs for one synthetic domain. Two domains that differ in
/// these knobs stand in for two scanners/institutions.
struct DomainProfile {
  std::string domain_id = "default";
  double noise_sigma = 0.02;        // additive gaussian noise, intensity units
  double contrast_bias = 1.0;       // fixed gamma applied at generation
  double head_scale = 0.35;         // mean head-ellipse radius / frame size
  double lesion_rate = 0.3;         // probability a frame carries a lesion
  double lesion_brightness = 0.35;  // mean intensity lift of lesion pixels
  int frame_height = 48;
  int frame_width = 48;
  int frames_per_stack = 6;
};

void validate_profile(const DomainProfile& profile);

DomainProfile profile_from_doc(const class KeyValueDoc& doc);
void profile_to_doc(const DomainProfile& profile, class KeyValueDoc& doc);
DomainProfile load_profile(const std::filesystem::path& path);

struct StackDescriptor {
  std::string stack_id;
  std::string domain_id;
  int frame_count = 0;
  std::string rel_dir;  // directory with fNNNN.nsf / mNNNN.nsm, relative to manifest
};

struct DatasetManifest {
  std::string dataset_id;
  std::uint64_t seed = 0;
  DomainProfile profile;
  std::vector<StackDescriptor> stacks;
  std::filesystem::path base_dir;  // directory holding the manifest file

  std::filesystem::path stack_dir(const StackDescriptor& sd) const { return base_dir / sd.rel_dir; }
};

/// Deterministic synthetic exam: an elliptical head on dark background plus
/// optional bright gaussian-blob lesions; mask POS where a blob contribution
/// exceeds half its peak amplitude.
Stack generate_stack(const DomainProfile& profile, std::uint64_t seed, const std::string& stack_id);

/// Writes n_stacks stacks (per-stack seeds derived from the corpus seed) and
/// a manifest file `manifest.txt` under out_dir. Fully reproducible.
DatasetManifest generate_corpus(const DomainProfile& profile, int n_stacks, std::uint64_t seed,
                                const std::string& dataset_id,
                                const std::filesystem::path& out_dir);

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Loads every frame/mask of one stack from disk.
Stack load_stack(const DatasetManifest& manifest, const StackDescriptor& sd);

}  // namespace ns
