#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "binbrain/model.hpp"

namespace binbrain {

// Compartment 0 is the reject/manual chute; 1..4 hold the four classes.
struct SortDecision {
  std::optional<std::size_t> label;  // class index when accepted
  int compartment = 0;
  double confidence = 0.0;           // max class probability
  std::optional<bool> biodegradable;
};

struct RouterConfig {
  double threshold = 0.6;
  // label index -> compartment; must be a bijection onto {1..4}
  std::array<int, 4> compartment_map = {1, 2, 3, 4};
  // label indices considered biodegradable; paper only, by default
  std::set<std::size_t> biodegradable_labels = {2};

  void validate() const;
};

// Argmax routing with a confidence gate; ties break to the lowest class
// index. Probabilities must be finite and sum to 1 within 1e-6.
SortDecision route(const std::array<double, 4>& probabilities, const RouterConfig& config);

bool biodegradability(std::size_t label, const RouterConfig& config = {});
bool biodegradability(const std::string& label, const RouterConfig& config = {});

struct StreamEntry {
  std::string item;
  SortDecision decision;
  std::string error;  // non-empty when the item was rejected by failure
};

struct StreamResult {
  std::vector<StreamEntry> log;
  std::array<std::uint64_t, 5> tallies = {0, 0, 0, 0, 0};  // by compartment
};

// Decode -> preprocess -> infer -> route per item; failures land in
// compartment 0 and the stream continues.
StreamResult run_stream(Model& model, const std::vector<std::filesystem::path>& items,
                        const RouterConfig& config);

// CSV "item,label,compartment,confidence,biodegradable".
void write_decision_log_csv(const StreamResult& result, const std::vector<std::string>& labels,
                            const std::filesystem::path& path);

}  // namespace binbrain
