#pragma once

#include <cstdint>
#include <filesystem>

#include "binbrain/data.hpp"

namespace binbrain {

struct SynthConfig {
  int per_class = 10;  // >= 2
  int size = 64;
  std::uint64_t seed = 1;
};

// Four procedural texture families with class-specific color statistics,
// mapped onto the waste labels:
//   glass   -> ellipse outlines on a cool blue field
//   metal   -> gray horizontal banding
//   paper   -> warm bright field with a grid pattern
//   plastic -> saturated blobs on a magenta field
// Files land under <out_dir>/<label>/imgNNN.ppm with a manifest.csv; the
// whole tree is a pure function of the seed.
DatasetManifest generate_synthetic_dataset(const std::filesystem::path& out_dir,
                                           const SynthConfig& config);

}  // namespace binbrain
