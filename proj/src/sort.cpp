#include "binbrain/sort.hpp"

#include <cmath>

#include "binbrain/data.hpp"
#include "binbrain/errors.hpp"
#include "binbrain/util.hpp"

namespace binbrain {

void RouterConfig::validate() const {
  if (!(threshold >= 0.0) || std::isnan(threshold))
    fail(Errc::invalid_config, "threshold must be a non-negative number");
  std::set<int> seen;
  for (int c : compartment_map) {
    if (c < 1 || c > 4) fail(Errc::invalid_config, "compartments must map onto 1..4");
    seen.insert(c);
  }
  if (seen.size() != 4) fail(Errc::invalid_config, "compartment map must be a bijection");
  for (std::size_t label : biodegradable_labels)
    if (label >= 4) fail(Errc::invalid_config, "biodegradable label index out of range");
}

SortDecision route(const std::array<double, 4>& probabilities, const RouterConfig& config) {
  config.validate();
  double total = 0.0;
  for (double p : probabilities) {
    if (!std::isfinite(p) || p < 0.0) fail(Errc::invalid_distribution, "probabilities must be finite and non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6)
    fail(Errc::invalid_distribution, "probabilities sum to " + fmt_g17(total));

  std::size_t best = 0;
  for (std::size_t i = 1; i < probabilities.size(); ++i)
    if (probabilities[i] > probabilities[best]) best = i;  // ties keep the lowest index

  SortDecision decision;
  decision.confidence = probabilities[best];
  if (probabilities[best] >= config.threshold) {
    decision.label = best;
    decision.compartment = config.compartment_map[best];
    decision.biodegradable = config.biodegradable_labels.count(best) > 0;
  }
  return decision;
}

bool biodegradability(std::size_t label, const RouterConfig& config) {
  if (label >= label_vocabulary().size()) fail(Errc::unknown_label, "label index out of range");
  return config.biodegradable_labels.count(label) > 0;
}

bool biodegradability(const std::string& label, const RouterConfig& config) {
  return biodegradability(label_index(label), config);
}

StreamResult run_stream(Model& model, const std::vector<std::filesystem::path>& items,
                        const RouterConfig& config) {
  config.validate();
  StreamResult result;
  for (const auto& item : items) {
    StreamEntry entry;
    entry.item = item.string();
    try {
      Image img = square_resize(decode_image(item), model.meta().input_size);
      Tensor input = normalize_image(img, model.meta().stats, model.meta().input_size);
      Tensor logp = model.forward(input.reshape({1, 3, input.dim(1), input.dim(2)}), Mode::eval);
      std::array<double, 4> probs{};
      std::span<const double> row = logp.values();
      for (std::size_t i = 0; i < probs.size() && i < row.size(); ++i) probs[i] = std::exp(row[i]);
      entry.decision = route(probs, config);
    } catch (const Error& e) {
      entry.error = e.what();
      entry.decision = SortDecision{};  // reject chute
    }
    result.tallies[static_cast<std::size_t>(entry.decision.compartment)] += 1;
    result.log.push_back(std::move(entry));
  }
  return result;
}

void write_decision_log_csv(const StreamResult& result, const std::vector<std::string>& labels,
                            const std::filesystem::path& path) {
  std::string out = "item,label,compartment,confidence,biodegradable\n";
  for (const auto& entry : result.log) {
    const auto& d = entry.decision;
    out += entry.item + ",";
    out += d.label ? labels[*d.label] : "reject";
    out += "," + std::to_string(d.compartment) + "," + fmt_g17(d.confidence) + ",";
    out += d.biodegradable ? (*d.biodegradable ? "true" : "false") : "n/a";
    out += "\n";
  }
  write_file_text(path, out);
}

}  // namespace binbrain
