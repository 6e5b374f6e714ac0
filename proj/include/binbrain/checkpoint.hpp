#pragma once

#include <filesystem>
#include <optional>

#include "binbrain/model.hpp"

namespace binbrain {

// Checkpoint file layout (bit-exact):
//   8 bytes  magic "BINBRN01"
//   8 bytes  little-endian u64 header length
//   N bytes  UTF-8 JSON header: architecture name, width, input size,
//            class-label list, channel stats used at train time, and the
//            named tensor list (name, shape, trainable flag) in order
//   payload  every listed tensor as little-endian f64, concatenated in
//            header order
//   8 bytes  little-endian u64 FNV-1a of the payload bytes

enum class HeadMode {
  strict,      // names, shapes, labels must match; bit-exact restore
  reinit_head, // backbone restored, head rebuilt fresh
};

struct LoadOptions {
  std::string expected_arch;  // empty accepts whatever the file declares
  HeadMode head_mode = HeadMode::strict;
  // reinit_head only: the new classification task.
  std::vector<std::string> new_labels;
  int new_hidden = 0;         // 0 keeps the stored hidden width
  std::uint64_t head_seed = 0;
};

void save_checkpoint(Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path, const LoadOptions& options = {});

}  // namespace binbrain
