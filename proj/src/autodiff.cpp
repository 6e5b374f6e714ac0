#include "binbrain/autodiff.hpp"

#include "binbrain/errors.hpp"

namespace binbrain {

namespace {
thread_local GradTape* g_current_tape = nullptr;
}

GradTape* GradTape::current() { return g_current_tape; }

void GradTape::record(const Tensor& output, std::function<void()> pull) {
  auto& impl = *output.impl();
  if (!impl.grad) impl.grad = std::make_shared<std::vector<double>>(impl.values->size(), 0.0);
  outputs_.insert(output.impl().get());
  nodes_.push_back(std::move(pull));
}

void GradTape::backward(const Tensor& loss) {
  if (consumed_) fail(Errc::tape_consumed, "backward() already ran on this tape");
  if (loss.numel() != 1) fail(Errc::non_scalar_loss, "loss has shape " + shape_str(loss.shape()));
  if (!loss.defined() || outputs_.find(loss.impl().get()) == outputs_.end())
    fail(Errc::detached_loss, "loss was not produced on this tape");
  consumed_ = true;
  (*loss.impl()->grad)[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  nodes_.clear();
  outputs_.clear();
}

TapeScope::TapeScope(GradTape& tape) : previous_(g_current_tape) { g_current_tape = &tape; }

TapeScope::~TapeScope() { g_current_tape = previous_; }

}  // namespace binbrain
