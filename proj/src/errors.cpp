#include "binbrain/errors.hpp"

namespace binbrain {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::invalid_shape: return "InvalidShape";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::division_by_zero: return "DivisionByZero";
    case Errc::non_scalar_loss: return "NonScalarLoss";
    case Errc::detached_loss: return "DetachedLoss";
    case Errc::tape_consumed: return "TapeConsumed";
    case Errc::non_deterministic_function: return "NonDeterministicFunction";
    case Errc::empty_output: return "EmptyOutput";
    case Errc::batch_too_small: return "BatchTooSmall";
    case Errc::window_too_large: return "WindowTooLarge";
    case Errc::unsupported_input_size: return "UnsupportedInputSize";
    case Errc::no_feature_vector: return "NoFeatureVector";
    case Errc::unknown_policy: return "UnknownPolicy";
    case Errc::arch_mismatch: return "ArchMismatch";
    case Errc::corrupt_checkpoint: return "CorruptCheckpoint";
    case Errc::unknown_label: return "UnknownLabel";
    case Errc::duplicate_path: return "DuplicatePath";
    case Errc::empty_manifest: return "EmptyManifest";
    case Errc::malformed_row: return "MalformedRow";
    case Errc::unsupported_format: return "UnsupportedFormat";
    case Errc::corrupt_file: return "CorruptFile";
    case Errc::not_square: return "NotSquare";
    case Errc::size_mismatch: return "SizeMismatch";
    case Errc::label_too_small: return "LabelTooSmall";
    case Errc::target_out_of_range: return "TargetOutOfRange";
    case Errc::non_finite_gradient: return "NonFiniteGradient";
    case Errc::non_finite_loss: return "NonFiniteLoss";
    case Errc::empty_dataset: return "EmptyDataset";
    case Errc::empty_row: return "EmptyRow";
    case Errc::unknown_selector: return "UnknownSelector";
    case Errc::invalid_distribution: return "InvalidDistribution";
    case Errc::invalid_config: return "InvalidConfig";
    case Errc::unwritable_directory: return "UnwritableDirectory";
    case Errc::io_error: return "IoError";
  }
  return "UnknownError";
}

}  // namespace binbrain
