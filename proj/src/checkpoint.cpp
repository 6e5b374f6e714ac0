#include "binbrain/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include <json.hpp>

#include "binbrain/errors.hpp"
#include "binbrain/util.hpp"

namespace binbrain {

namespace {

constexpr char kMagic[8] = {'B', 'I', 'N', 'B', 'R', 'N', '0', '1'};

void put_u64_le(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

struct TensorEntry {
  std::string name;
  Shape shape;
  bool trainable = false;
  Tensor* tensor = nullptr;
};

// Parameters first is not enough: layout must match visitation order with
// buffers interleaved deterministically. Parameters and buffers are each
// visited in forward order; buffers follow all parameters.
std::vector<TensorEntry> tensor_table(Model& model) {
  std::vector<TensorEntry> entries;
  model.visit_parameters([&](const std::string& name, Tensor& t) {
    entries.push_back({name, t.shape(), t.requires_grad(), &t});
  });
  model.visit_buffers([&](const std::string& name, Tensor& t) {
    entries.push_back({name, t.shape(), false, &t});
  });
  return entries;
}

}  // namespace

void save_checkpoint(Model& model, const std::filesystem::path& path) {
  auto entries = tensor_table(model);
  for (const auto& entry : entries)
    for (double v : entry.tensor->values())
      if (!std::isfinite(v))
        fail(Errc::non_finite_loss, "tensor '" + entry.name + "' holds a non-finite value");

  const ModelMeta& meta = model.meta();
  nlohmann::json header;
  header["arch"] = meta.arch;
  header["width"] = meta.width;
  header["input_size"] = meta.input_size;
  header["labels"] = meta.labels;
  header["stats"]["mean"] = meta.stats.mean;
  header["stats"]["std"] = meta.stats.std_dev;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& entry : entries)
    tensors.push_back({{"name", entry.name}, {"shape", entry.shape}, {"trainable", entry.trainable}});
  header["tensors"] = tensors;
  std::string header_text = header.dump();

  std::vector<unsigned char> payload;
  for (const auto& entry : entries)
    for (double v : entry.tensor->values()) put_u64_le(payload, std::bit_cast<std::uint64_t>(v));

  std::vector<unsigned char> file;
  file.insert(file.end(), kMagic, kMagic + 8);
  put_u64_le(file, header_text.size());
  file.insert(file.end(), header_text.begin(), header_text.end());
  file.insert(file.end(), payload.begin(), payload.end());
  put_u64_le(file, fnv1a64(payload.data(), payload.size()));
  write_file_bytes(path, file.data(), file.size());
}

Model load_checkpoint(const std::filesystem::path& path, const LoadOptions& options) {
  auto bytes = read_file_bytes(path);
  const std::string name = path.string();
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    fail(Errc::corrupt_checkpoint, name + ": bad magic");
  std::uint64_t header_len = get_u64_le(bytes.data() + 8);
  if (16 + header_len + 8 > bytes.size()) fail(Errc::corrupt_checkpoint, name + ": truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception&) {
    fail(Errc::corrupt_checkpoint, name + ": unparseable header");
  }

  std::string arch;
  int width = 0, input_size = 0;
  std::vector<std::string> labels;
  ChannelStats stats;
  struct StoredTensor {
    std::string name;
    Shape shape;
    bool trainable;
  };
  std::vector<StoredTensor> stored;
  try {
    arch = header.at("arch").get<std::string>();
    width = header.at("width").get<int>();
    input_size = header.at("input_size").get<int>();
    labels = header.at("labels").get<std::vector<std::string>>();
    stats.mean = header.at("stats").at("mean").get<std::array<double, 3>>();
    stats.std_dev = header.at("stats").at("std").get<std::array<double, 3>>();
    for (const auto& t : header.at("tensors"))
      stored.push_back({t.at("name").get<std::string>(), t.at("shape").get<Shape>(),
                        t.at("trainable").get<bool>()});
  } catch (const nlohmann::json::exception&) {
    fail(Errc::corrupt_checkpoint, name + ": header misses required fields");
  }

  if (!options.expected_arch.empty() && options.expected_arch != arch)
    fail(Errc::arch_mismatch, name + ": holds '" + arch + "', expected '" + options.expected_arch + "'");

  // Hidden width is recovered from the stored head shape.
  int hidden = 0;
  for (const auto& t : stored)
    if (t.name == "head.fc1.weight" && t.shape.size() == 2) hidden = static_cast<int>(t.shape[1]);
  if (hidden == 0) fail(Errc::corrupt_checkpoint, name + ": no classifier head recorded");

  std::size_t payload_doubles = 0;
  for (const auto& t : stored) payload_doubles += shape_numel(t.shape);
  std::size_t payload_bytes = payload_doubles * 8;
  if (16 + header_len + payload_bytes + 8 != bytes.size())
    fail(Errc::corrupt_checkpoint, name + ": payload length mismatch");
  const unsigned char* payload = bytes.data() + 16 + header_len;
  std::uint64_t checksum = get_u64_le(payload + payload_bytes);
  if (checksum != fnv1a64(payload, payload_bytes))
    fail(Errc::corrupt_checkpoint, name + ": checksum mismatch");

  Model model = build_model(arch, width, input_size, labels, hidden, /*seed=*/0);
  model.meta().stats = stats;

  const bool reinit = options.head_mode == HeadMode::reinit_head;
  if (reinit) {
    attach_classifier_head(model, options.new_hidden > 0 ? options.new_hidden : hidden,
                           options.new_labels.empty() ? labels : options.new_labels,
                           options.head_seed);
  }

  // Index the rebuilt model's tensors and restore in stored order.
  auto entries = tensor_table(model);
  if (!reinit && stored.size() != entries.size())
    fail(Errc::arch_mismatch, name + ": tensor count differs from the rebuilt model");
  std::size_t cursor = 0;
  for (const auto& t : stored) {
    std::size_t count = shape_numel(t.shape);
    const unsigned char* src = payload + cursor * 8;
    cursor += count;
    bool is_head = t.name.rfind("head.", 0) == 0;
    if (reinit && is_head) continue;  // fresh head keeps its new initialization

    auto it = std::find_if(entries.begin(), entries.end(),
                           [&](const TensorEntry& e) { return e.name == t.name; });
    if (it == entries.end())
      fail(reinit ? Errc::shape_mismatch : Errc::arch_mismatch,
           name + ": stored tensor '" + t.name + "' has no slot in the rebuilt model");
    if (it->tensor->shape() != t.shape)
      fail(reinit ? Errc::shape_mismatch : Errc::arch_mismatch,
           name + ": '" + t.name + "' stored as " + shape_str(t.shape) + ", model expects " +
               shape_str(it->tensor->shape()));
    double* dst = it->tensor->values_mut().data();
    for (std::size_t i = 0; i < count; ++i)
      dst[i] = std::bit_cast<double>(get_u64_le(src + i * 8));
    if (it->tensor->requires_grad() != t.trainable) it->tensor->set_requires_grad(t.trainable);
  }
  return model;
}

}  // namespace binbrain
