#pragma once

#include <cstdint>
#include <string>

#include "dpgan/gan.hpp"

namespace dpgan {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Versioned binary checkpoint: magic, format version, architecture and
/// schema descriptors, then little-endian 64-bit-float parameter arrays in
/// declaration order. `strip_discriminator` drops theta_D for public
/// release artifacts (the attack command then refuses the checkpoint).
void save_checkpoint(const GanModel& model, const std::string& path, bool strip_discriminator = false);
GanModel load_checkpoint(const std::string& path);

/// JSON sidecar written next to every checkpoint.
struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::string config_digest;
  bool is_private = false;
  double final_epsilon = 0.0;  // meaningful only when is_private
  double delta = 0.0;
  bool diverged = false;
  double wall_seconds = 0.0;
};

std::string meta_path_for(const std::string& checkpoint_path);
void save_checkpoint_meta(const CheckpointMeta& meta, const std::string& path);
CheckpointMeta load_checkpoint_meta(const std::string& path);

/// FNV-1a hex digest of the resolved config text.
std::string config_digest(const std::string& resolved_config_text);

}  // namespace dpgan
