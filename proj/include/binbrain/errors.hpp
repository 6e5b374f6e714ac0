#pragma once

#include <stdexcept>
#include <string>

namespace binbrain {

// Every failure the library reports, one code per condition the callers
// (and the CLI exit-code mapping) care about.
enum class Errc {
  // tensor / autodiff
  invalid_shape,
  shape_mismatch,
  division_by_zero,
  non_scalar_loss,
  detached_loss,
  tape_consumed,
  non_deterministic_function,
  // layers
  empty_output,
  batch_too_small,
  window_too_large,
  // models / checkpoints
  unsupported_input_size,
  no_feature_vector,
  unknown_policy,
  arch_mismatch,
  corrupt_checkpoint,
  // data pipeline
  unknown_label,
  duplicate_path,
  empty_manifest,
  malformed_row,
  unsupported_format,
  corrupt_file,
  not_square,
  size_mismatch,
  label_too_small,
  // training
  target_out_of_range,
  non_finite_gradient,
  non_finite_loss,
  // evaluation
  empty_dataset,
  empty_row,
  unknown_selector,
  // routing
  invalid_distribution,
  // configuration and I/O
  invalid_config,
  unwritable_directory,
  io_error,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace binbrain
