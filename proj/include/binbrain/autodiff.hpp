#pragma once

#include <functional>
#include <unordered_set>
#include <vector>

#include "binbrain/tensor.hpp"

namespace binbrain {

// Define-by-run gradient tape. Ops record themselves onto the tape that is
// active on the current thread (see TapeScope); backward() replays the nodes
// in reverse creation order exactly once and then leaves the tape consumed.
// Gradients accumulate additively into each tensor's buffer; the caller is
// responsible for zeroing parameter gradients between steps.
//
// Each thread may own its own tape; there is no shared state between tapes.
class GradTape {
 public:
  GradTape() = default;
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  // Seeds d(loss)/d(loss) = 1 and pulls gradients back through every node.
  // loss must be a single-element tensor produced on this tape.
  void backward(const Tensor& loss);

  bool consumed() const { return consumed_; }
  std::size_t node_count() const { return nodes_.size(); }

  // Tape active on this thread, or nullptr outside any TapeScope.
  static GradTape* current();

  // Registers `pull`, which reads output.grad() and accumulates into the
  // input gradients it captured. Allocates the output's gradient buffer.
  void record(const Tensor& output, std::function<void()> pull);

 private:
  std::vector<std::function<void()>> nodes_;
  std::unordered_set<const detail::TensorImpl*> outputs_;
  bool consumed_ = false;
};

class TapeScope {
 public:
  explicit TapeScope(GradTape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  GradTape* previous_;
};

// True when a tape is active and the tensor carries a gradient buffer,
// i.e. an op consuming it must record a node.
inline bool tape_wants(const Tensor& t) {
  return GradTape::current() != nullptr && t.grad_tracked();
}

}  // namespace binbrain
