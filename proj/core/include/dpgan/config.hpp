#pragma once

#include <cstdint>
#include <string>

#include "dpgan/gan.hpp"

namespace dpgan {

/// Full training-run configuration, read from a line-based
/// `key = value` file with `[section]` headers. Unknown sections or keys
/// are rejected; serialize() writes the fully resolved form (all defaults
/// expanded), which every run copies next to its outputs.
struct RunConfig {
  std::string data_path;
  std::string schema_path;
  GanArchitecture arch;
  TrainLoopConfig train;
  std::uint64_t seed = 1;
  std::string out_dir = "out";

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);
  std::string serialize() const;
  void validate() const;
};

}  // namespace dpgan
