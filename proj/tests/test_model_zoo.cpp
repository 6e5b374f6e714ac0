#include <cmath>
#include <cstring>
#include <filesystem>
#include <map>
#include <set>

#include <doctest.h>

#include "binbrain/checkpoint.hpp"
#include "binbrain/errors.hpp"
#include "binbrain/model.hpp"
#include "binbrain/ops.hpp"
#include "binbrain/train.hpp"
#include "binbrain/util.hpp"

using namespace binbrain;

namespace {

const std::vector<std::string> kLabels = {"glass", "metal", "paper", "plastic"};

// Parameter budget derived from the layer recipe alone, independent of the
// builder: conv = outC*inC*k*k (+outC if biased), bn affine = 2C,
// linear = in*out + out.
std::size_t expected_resnet_params(std::size_t w, int input_size, std::size_t classes,
                                   std::size_t hidden) {
  std::size_t total = 0;
  std::size_t stem_k = input_size == 32 ? 3 : 7;
  total += w * 3 * stem_k * stem_k + 2 * w;  // stem conv + bn
  std::size_t in_c = w;
  for (int stage = 1; stage <= 4; ++stage) {
    std::size_t out_c = w << (stage - 1);
    bool reshapes = stage != 1;
    total += out_c * in_c * 9 + 2 * out_c;   // block1 conv1 + bn1
    total += out_c * out_c * 9 + 2 * out_c;  // block1 conv2 + bn2
    if (reshapes) total += out_c * in_c + 2 * out_c;  // downsample conv + bn
    total += out_c * out_c * 9 + 2 * out_c;  // block2 conv1 + bn1
    total += out_c * out_c * 9 + 2 * out_c;  // block2 conv2 + bn2
    in_c = out_c;
  }
  total += in_c * hidden + hidden;      // fc1
  total += hidden * classes + classes;  // fc2
  return total;
}

std::size_t expected_vgg_params(std::size_t w, int input_size, std::size_t classes,
                                std::size_t hidden) {
  std::size_t total = 0;
  std::size_t in_c = 3;
  std::size_t spatial = static_cast<std::size_t>(input_size);
  for (int blk = 1; blk <= 3; ++blk) {
    std::size_t out_c = w << (blk - 1);
    total += out_c * in_c * 9 + out_c;
    total += out_c * out_c * 9 + out_c;
    in_c = out_c;
    spatial /= 2;
  }
  std::size_t features = in_c * spatial * spatial;
  total += features * hidden + hidden;
  total += hidden * classes + classes;
  return total;
}

std::map<std::string, std::vector<double>> snapshot_params(Model& model) {
  std::map<std::string, std::vector<double>> snap;
  model.visit_parameters([&](const std::string& path, Tensor& t) {
    snap[path] = std::vector<double>(t.values().begin(), t.values().end());
  });
  return snap;
}

std::filesystem::path test_dir() {
  auto dir = std::filesystem::temp_directory_path() / "binbrain_model_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("mini_resnet18 forward contract: shapes and normalized rows") {
  Model model = build_mini_resnet18(8, 64, kLabels, 32, 7);
  Tensor input = Tensor::zeros({1, 3, 64, 64});
  Rng rng(19);
  for (double& v : input.values_mut()) v = rng.range(-1, 1);
  Tensor out = model.forward(input, Mode::eval);
  CHECK(out.shape() == Shape{1, 4});
  double total = 0.0;
  for (double v : out.values()) total += std::exp(v);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("parameter counts match the recipe-derived budget") {
  for (int input : {32, 64}) {
    Model resnet = build_mini_resnet18(16, input, kLabels, 256, 1);
    CHECK(resnet.parameter_count() == expected_resnet_params(16, input, 4, 256));
    Model vgg = build_mini_vgg(16, input, kLabels, 256, 1);
    CHECK(vgg.parameter_count() == expected_vgg_params(16, input, 4, 256));
  }
  // where the budget math says vgg outweighs resnet, the models agree
  std::size_t vgg_count = expected_vgg_params(16, 64, 4, 256);
  std::size_t resnet_count = expected_resnet_params(16, 64, 4, 256);
  Model vgg = build_mini_vgg(16, 64, kLabels, 256, 2);
  Model resnet = build_mini_resnet18(16, 64, kLabels, 256, 2);
  CHECK((vgg.parameter_count() > resnet.parameter_count()) == (vgg_count > resnet_count));
}

TEST_CASE("same seed builds bit-identical models; different seeds differ") {
  Model a = build_mini_resnet18(8, 32, kLabels, 64, 42);
  Model b = build_mini_resnet18(8, 32, kLabels, 64, 42);
  Model c = build_mini_resnet18(8, 32, kLabels, 64, 43);
  auto sa = snapshot_params(a), sb = snapshot_params(b), sc = snapshot_params(c);
  CHECK(sa == sb);
  CHECK(sa != sc);
}

TEST_CASE("unsupported input sizes and widths are rejected") {
  CHECK_THROWS_AS((void)build_mini_resnet18(8, 48, kLabels, 64, 1), Error);
  CHECK_THROWS_AS((void)build_mini_vgg(8, 100, kLabels, 64, 1), Error);
  CHECK_THROWS_AS((void)build_mini_resnet18(2, 32, kLabels, 64, 1), Error);
}

TEST_CASE("attach_classifier_head swaps only the head") {
  Model model = build_mini_resnet18(8, 32, kLabels, 64, 5);
  auto before = snapshot_params(model);
  std::size_t backbone_count = 0;
  for (const auto& [path, values] : before)
    if (path.rfind("head.", 0) != 0) backbone_count += values.size();

  attach_classifier_head(model, 32, kLabels, 99);
  auto after = snapshot_params(model);

  for (const auto& [path, values] : after) {
    if (path.rfind("head.", 0) == 0) continue;
    CHECK(values == before.at(path));  // backbone untouched
  }
  std::size_t features = model.meta().feature_size;
  CHECK(model.parameter_count() == backbone_count + features * 32 + 32 + 32 * 4 + 4);

  Tensor out = model.forward(Tensor::zeros({2, 3, 32, 32}), Mode::eval);
  CHECK(out.shape() == Shape{2, 4});
  for (std::size_t row = 0; row < 2; ++row) {
    double total = 0.0;
    for (std::size_t j = 0; j < 4; ++j) total += std::exp(out.values()[row * 4 + j]);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("freeze policies rewrite exactly the advertised trainable sets") {
  Model model = build_mini_resnet18(8, 32, kLabels, 64, 3);

  apply_freeze_policy(model, FreezePolicy::head_only);
  for (const auto& [path, trainable] : model.trainable_mask())
    CHECK(trainable == (path.rfind("head.", 0) == 0));

  apply_freeze_policy(model, FreezePolicy::fine_tune);
  for (const auto& [path, trainable] : model.trainable_mask()) CHECK(trainable);

  apply_freeze_policy(model, FreezePolicy::feature_extraction);
  auto convs = last_conv_layers(model, 3);
  REQUIRE(convs.size() == 3);
  // forward order: stage4.block1's downsample conv sits before block2
  CHECK(convs[0] == "stage4.block1.downsample.conv");
  CHECK(convs[1] == "stage4.block2.conv1");
  CHECK(convs[2] == "stage4.block2.conv2");
  std::set<std::string> expected_prefixes = {
      "head.",
      "stage4.block1.downsample.conv.", "stage4.block1.downsample.bn.",
      "stage4.block2.conv1.", "stage4.block2.bn1.",
      "stage4.block2.conv2.", "stage4.block2.bn2.",
  };
  for (const auto& [path, trainable] : model.trainable_mask()) {
    bool expected = false;
    for (const auto& prefix : expected_prefixes)
      if (path.rfind(prefix, 0) == 0) expected = true;
    CHECK(trainable == expected);
  }

  // values must never change when policies are applied
  auto before = snapshot_params(model);
  apply_freeze_policy(model, FreezePolicy::head_only);
  apply_freeze_policy(model, FreezePolicy::feature_extraction);
  CHECK(snapshot_params(model) == before);

  CHECK_THROWS_AS((void)freeze_policy_from_name("everything"), Error);
}

TEST_CASE("eval-mode forward is deterministic") {
  Model model = build_mini_resnet18(8, 32, kLabels, 64, 21);
  Tensor input = Tensor::zeros({1, 3, 32, 32});
  Rng rng(22);
  for (double& v : input.values_mut()) v = rng.range(-1, 1);
  Tensor a = model.forward(input, Mode::eval);
  Tensor b = model.forward(input, Mode::eval);
  CHECK(std::memcmp(a.values().data(), b.values().data(), a.numel() * sizeof(double)) == 0);
}

TEST_CASE("zeroed residual branches leave only the shortcut composition") {
  Model model = build_mini_resnet18(8, 32, kLabels, 64, 23);
  for (auto& named : model.layers()) {
    if (auto* block = std::get_if<BasicBlock>(&named.layer)) {
      std::fill(block->conv1.weight.values_mut().begin(), block->conv1.weight.values_mut().end(), 0.0);
      std::fill(block->conv2.weight.values_mut().begin(), block->conv2.weight.values_mut().end(), 0.0);
    }
  }
  Tensor input = Tensor::zeros({1, 3, 32, 32});
  Rng rng(24);
  for (double& v : input.values_mut()) v = rng.range(-1, 1);

  // independent recomposition: stem, pool, then shortcut-only blocks
  auto& layers = model.layers();
  Tensor x = input;
  {
    auto stem_conv = std::get<Conv2d>(layers[0].layer);
    auto stem_bn = std::get<BatchNorm>(layers[1].layer);
    x = relu(batchnorm(conv2d(x, stem_conv), stem_bn, false));
    x = max_pool2d(x, 2, 2);
  }
  for (auto& named : layers) {
    if (auto* block = std::get_if<BasicBlock>(&named.layer)) {
      Tensor shortcut = x;
      if (block->downsample)
        shortcut = batchnorm(conv2d(x, block->downsample->conv), block->downsample->bn, false);
      x = relu(shortcut);  // zero branch contributes bn2(0) = beta = 0
    }
  }
  x = global_avg_pool2d(x);
  x = x.reshape({1, x.numel()});
  auto fc1 = std::get<Linear>(layers[layers.size() - 4].layer);
  auto fc2 = std::get<Linear>(layers[layers.size() - 2].layer);
  x = log_softmax(linear(relu(linear(x, fc1)), fc2));

  Tensor got = model.forward(input, Mode::eval);
  REQUIRE(got.numel() == x.numel());
  for (std::size_t i = 0; i < x.numel(); ++i)
    CHECK(got.values()[i] == doctest::Approx(x.values()[i]).epsilon(1e-12));
}

TEST_CASE("checkpoint round-trip is the identity on parameters and flags") {
  auto path = test_dir() / "model.bin";

  Model model = build_mini_resnet18(8, 32, kLabels, 64, 31);
  apply_freeze_policy(model, FreezePolicy::feature_extraction);
  model.meta().stats = {{0.1, 0.2, 0.3}, {0.4, 0.5, 0.6}};
  // warm the running stats so buffers round-trip non-trivially
  (void)model.forward(Tensor::full({4, 3, 32, 32}, 0.37), Mode::train);

  save_checkpoint(model, path);
  Model loaded = load_checkpoint(path, {.expected_arch = "mini_resnet18"});

  CHECK(snapshot_params(model) == snapshot_params(loaded));
  CHECK(model.trainable_mask() == loaded.trainable_mask());
  CHECK(loaded.meta().stats.mean == model.meta().stats.mean);
  CHECK(loaded.meta().labels == kLabels);

  std::map<std::string, std::vector<double>> buf_a, buf_b;
  model.visit_buffers([&](const std::string& p, Tensor& t) {
    buf_a[p] = std::vector<double>(t.values().begin(), t.values().end());
  });
  loaded.visit_buffers([&](const std::string& p, Tensor& t) {
    buf_b[p] = std::vector<double>(t.values().begin(), t.values().end());
  });
  CHECK(buf_a == buf_b);

  CHECK_THROWS_AS((void)load_checkpoint(path, {.expected_arch = "mini_vgg"}), Error);
}

TEST_CASE("reinit_head transfer keeps the backbone and rebuilds the head") {
  auto path = test_dir() / "transfer.bin";
  Model source = build_mini_resnet18(8, 32, kLabels, 64, 41);
  save_checkpoint(source, path);

  LoadOptions opts;
  opts.head_mode = HeadMode::reinit_head;
  opts.new_labels = {"a", "b", "c", "d", "e", "f"};
  opts.new_hidden = 16;
  opts.head_seed = 77;
  Model target = load_checkpoint(path, opts);

  auto src = snapshot_params(source), dst = snapshot_params(target);
  for (const auto& [name, values] : src) {
    if (name.rfind("head.", 0) == 0) continue;
    CHECK(dst.at(name) == values);
  }
  CHECK(target.meta().labels.size() == 6);
  Tensor out = target.forward(Tensor::zeros({1, 3, 32, 32}), Mode::eval);
  CHECK(out.shape() == Shape{1, 6});
}

TEST_CASE("corrupted checkpoints are rejected") {
  auto path = test_dir() / "corrupt.bin";
  Model model = build_mini_resnet18(8, 32, kLabels, 64, 51);
  save_checkpoint(model, path);
  auto bytes = read_file_bytes(path);

  write_file_bytes(path, bytes.data(), bytes.size() / 2);  // truncated
  CHECK_THROWS_AS((void)load_checkpoint(path), Error);

  auto tampered = bytes;  // payload bit flip fails the checksum
  tampered[tampered.size() / 2] ^= 0x40;
  write_file_bytes(path, tampered.data(), tampered.size());
  CHECK_THROWS_AS((void)load_checkpoint(path), Error);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  write_file_bytes(path, bad_magic.data(), bad_magic.size());
  CHECK_THROWS_AS((void)load_checkpoint(path), Error);
}

TEST_CASE("training steps leave frozen parameters bit-identical") {
  Model model = build_mini_resnet18(8, 32, kLabels, 32, 61);
  apply_freeze_policy(model, FreezePolicy::head_only);
  auto before = snapshot_params(model);

  AdamState adam;
  TrainConfig config;
  config.batch_size = 2;
  Rng rng(62);
  for (int step = 0; step < 3; ++step) {
    Tensor input = Tensor::zeros({2, 3, 32, 32});
    for (double& v : input.values_mut()) v = rng.range(-1, 1);
    model.zero_grads();
    GradTape tape;
    {
      TapeScope scope(tape);
      Tensor logp = model.forward(input, Mode::train);
      tape.backward(nll_loss(logp, {0, 1}));
    }
    adam_step(model, adam, config);
  }

  auto after = snapshot_params(model);
  for (const auto& [path, values] : after) {
    if (path.rfind("head.", 0) == 0) {
      CHECK(values != before.at(path));  // the head did train
    } else {
      CHECK(values == before.at(path));  // frozen backbone untouched
    }
  }
}
