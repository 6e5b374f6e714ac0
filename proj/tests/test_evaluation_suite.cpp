#include <cmath>
#include <filesystem>

#include <doctest.h>

#include "binbrain/errors.hpp"
#include "binbrain/eval.hpp"
#include "binbrain/model.hpp"
#include "binbrain/nn.hpp"
#include "binbrain/util.hpp"

using namespace binbrain;

namespace {

const std::vector<std::string> kLabels = {"glass", "metal", "paper", "plastic"};

// Row percentages published for the reference run, to one decimal.
constexpr double kReferenceRows[4][4] = {
    {83.8, 3.7, 3.7, 8.8},
    {1.7, 89.0, 2.5, 6.8},
    {0.1, 1.1, 90.2, 8.6},
    {7.5, 4.6, 5.2, 82.8},
};

}  // namespace

TEST_CASE("confusion matrix bookkeeping and exact accuracy") {
  ConfusionMatrix cm(kLabels);
  // forced-correct stream: identity diagonal
  for (std::size_t label = 0; label < 4; ++label)
    for (int i = 0; i < 5; ++i) cm.add(label, label);
  CHECK(cm.total() == 20);
  CHECK(cm.trace() == 20);
  CHECK(cm.accuracy() == 1.0);

  ConfusionMatrix single(kLabels);
  single.add(2, 1);
  CHECK(single.total() == 1);
  CHECK(single.accuracy() == 0.0);
  std::uint64_t nonzero = 0;
  for (auto c : single.counts) nonzero += c > 0 ? 1 : 0;
  CHECK(nonzero == 1);
}

TEST_CASE("row_normalize reproduces hand percentages and rejects empty rows") {
  ConfusionMatrix cm(kLabels);
  std::uint64_t glass_row[4] = {838, 37, 37, 88};
  for (std::size_t c = 0; c < 4; ++c)
    for (std::uint64_t i = 0; i < glass_row[c]; ++i) cm.add(0, c);
  for (std::size_t r = 1; r < 4; ++r) cm.add(r, r);  // fill other rows minimally
  auto pct = row_normalize(cm);
  CHECK(pct[0] == doctest::Approx(83.8));
  CHECK(pct[1] == doctest::Approx(3.7));
  CHECK(pct[2] == doctest::Approx(3.7));
  CHECK(pct[3] == doctest::Approx(8.8));

  ConfusionMatrix uniform(kLabels);
  for (std::size_t c = 0; c < 4; ++c) uniform.add(0, c);
  for (std::size_t r = 1; r < 4; ++r) uniform.add(r, 0);
  auto upct = row_normalize(uniform);
  for (std::size_t c = 0; c < 4; ++c) CHECK(upct[c] == doctest::Approx(25.0));

  ConfusionMatrix one_hot(kLabels);
  one_hot.add(0, 0);
  for (std::size_t r = 1; r < 4; ++r) one_hot.add(r, r);
  auto opct = row_normalize(one_hot);
  CHECK(opct[0] == doctest::Approx(100.0));
  CHECK(opct[1] == doctest::Approx(0.0));

  ConfusionMatrix holey(kLabels);
  holey.add(0, 0);  // rows 1..3 stay empty
  CHECK_THROWS_WITH_AS((void)row_normalize(holey), doctest::Contains("EmptyRow"), Error);
}

TEST_CASE("a synthetic stream built from the reference percentages lands within 0.1") {
  ConfusionMatrix cm(kLabels);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) {
      auto count = static_cast<std::uint64_t>(std::llround(kReferenceRows[r][c] * 10.0));
      for (std::uint64_t i = 0; i < count; ++i) cm.add(r, c);
    }
  auto pct = row_normalize(cm);
  CHECK(std::abs(pct[0 * 4 + 0] - 83.8) <= 0.1);
  CHECK(std::abs(pct[1 * 4 + 1] - 89.0) <= 0.1);
  CHECK(std::abs(pct[2 * 4 + 2] - 90.2) <= 0.1);
  CHECK(std::abs(pct[3 * 4 + 3] - 82.8) <= 0.1);
  for (std::size_t r = 0; r < 4; ++r) {
    double row_sum = 0.0;
    for (std::size_t c = 0; c < 4; ++c)
      row_sum += std::round(pct[r * 4 + c] * 10.0) / 10.0;  // one-decimal reporting
    CHECK(std::abs(row_sum - 100.0) <= 0.1);
  }
}

TEST_CASE("property: row_normalize is invariant under uniform count scaling") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    ConfusionMatrix base(kLabels);
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 4; ++c) {
        std::uint64_t count = 1 + rng.index(20);
        for (std::uint64_t i = 0; i < count; ++i) base.add(r, c);
      }
    std::uint64_t k = 2 + rng.index(5);
    ConfusionMatrix scaled(kLabels);
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 4; ++c)
        for (std::uint64_t i = 0; i < base.at(r, c) * k; ++i) scaled.add(r, c);
    auto a = row_normalize(base), b = row_normalize(scaled);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  }
}

TEST_CASE("evaluate ties counts, accuracy, and per-sample records together") {
  Model model = build_mini_resnet18(4, 32, kLabels, 16, 3);
  ChannelStats stats{{0.5, 0.5, 0.5}, {0.25, 0.25, 0.25}};

  LoadedDataset ds;
  Rng rng(4);
  for (std::size_t i = 0; i < 10; ++i) {
    Image img = make_image(32, 32);
    for (Rgb& px : img.pixels)
      px = {static_cast<std::uint8_t>(rng.index(256)), static_cast<std::uint8_t>(rng.index(256)),
            static_cast<std::uint8_t>(rng.index(256))};
    ds.images.push_back(img);
    ds.labels.push_back(i % 4);
    ds.paths.push_back("img" + std::to_string(i) + ".ppm");
  }

  EvalResult result = evaluate(model, ds, stats, 3);
  CHECK(result.confusion.total() == 10);
  CHECK(result.records.size() == 10);
  CHECK(result.accuracy ==
        static_cast<double>(result.confusion.trace()) / static_cast<double>(result.confusion.total()));
  for (const auto& rec : result.records) {
    CHECK(rec.confidence > 0.0);
    CHECK(rec.confidence <= 1.0);
  }
  // chunked evaluation must agree with single-batch evaluation
  EvalResult whole = evaluate(model, ds, stats, 100);
  CHECK(whole.confusion.counts == result.confusion.counts);

  LoadedDataset empty;
  CHECK_THROWS_WITH_AS((void)evaluate(model, empty, stats), doctest::Contains("EmptyDataset"), Error);
}

TEST_CASE("feature maps: constant channels, channel counts, selectors") {
  Model model = build_mini_resnet18(4, 32, kLabels, 16, 5);
  // zero the stem conv: its post-relu output is constant zero everywhere
  auto& stem = std::get<Conv2d>(model.layers()[0].layer);
  std::fill(stem.weight.values_mut().begin(), stem.weight.values_mut().end(), 0.0);

  Tensor input = Tensor::full({3, 32, 32}, 0.2);
  FeatureMapSet maps = extract_feature_maps(model, input, LayerSelector::initial);
  CHECK(maps.layer_path == "stem.relu");
  CHECK(maps.shape[0] == 4);  // stem width
  for (double v : maps.normalized) CHECK(v == 0.0);

  FeatureMapSet middle = extract_feature_maps(model, input, LayerSelector::middle);
  CHECK(middle.layer_path == "stage2.block2");
  CHECK(middle.shape[0] == 8);
  FeatureMapSet last = extract_feature_maps(model, input, LayerSelector::last);
  CHECK(last.layer_path == "stage4.block2");
  CHECK(last.shape[0] == 32);
  for (double v : last.normalized) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }

  CHECK_THROWS_WITH_AS((void)layer_selector_from_name("penultimate"), doctest::Contains("UnknownSelector"),
                       Error);
}

TEST_CASE("a planted vertical-edge filter fires along the edge column") {
  Model model = build_mini_resnet18(4, 32, kLabels, 16, 7);
  // channel 0 of the stem becomes a vertical-edge detector on the red plane
  auto& stem = std::get<Conv2d>(model.layers()[0].layer);
  std::fill(stem.weight.values_mut().begin(), stem.weight.values_mut().end(), 0.0);
  // 3x3 kernel [[-1,0,1],[-1,0,1],[-1,0,1]] on channel 0
  for (int row = 0; row < 3; ++row) {
    stem.weight.values_mut()[static_cast<std::size_t>(row) * 3 + 0] = -1.0;
    stem.weight.values_mut()[static_cast<std::size_t>(row) * 3 + 2] = 1.0;
  }

  // dark-to-bright step at column 16 on the red channel
  Tensor input = Tensor::zeros({3, 32, 32});
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t x = 16; x < 32; ++x) input.values_mut()[y * 32 + x] = 1.0;

  FeatureMapSet maps = extract_feature_maps(model, input, LayerSelector::initial);

  // the same response computed longhand: convolve, bn(identity stats), relu,
  // then min-max; normalization is affine-invariant so plain conv+relu works
  const std::size_t hw = 32 * 32;
  std::vector<double> expect(hw, 0.0);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      double acc = 0.0;
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          int iy = y + ky - 1, ix = x + kx - 1;
          if (iy < 0 || iy >= 32 || ix < 0 || ix >= 32) continue;
          double k = kx == 0 ? -1.0 : (kx == 2 ? 1.0 : 0.0);
          acc += k * input.values()[static_cast<std::size_t>(iy) * 32 + ix];
        }
      expect[static_cast<std::size_t>(y) * 32 + x] = std::max(0.0, acc);
    }
  double hi = *std::max_element(expect.begin(), expect.end());
  for (double& v : expect) v = hi > 0 ? v / hi : 0.0;

  for (std::size_t i = 0; i < hw; ++i)
    CHECK(maps.normalized[i] == doctest::Approx(expect[i]).epsilon(1e-9));

  // peak activation sits on the edge columns 15/16
  for (std::size_t y = 1; y < 31; ++y) {
    double best = -1.0;
    std::size_t best_x = 0;
    for (std::size_t x = 0; x < 32; ++x)
      if (maps.normalized[y * 32 + x] > best) {
        best = maps.normalized[y * 32 + x];
        best_x = x;
      }
    CHECK((best_x == 15 || best_x == 16));
  }
}

TEST_CASE("property: feature-map normalization ignores positive rescaling") {
  Rng seeds(13);
  for (int trial = 0; trial < 5; ++trial) {
    Model model = build_mini_resnet18(4, 32, kLabels, 16, seeds.next());
    Tensor input = Tensor::zeros({3, 32, 32});
    Rng rng(seeds.next());
    for (double& v : input.values_mut()) v = rng.range(-1, 1);
    FeatureMapSet base = extract_feature_maps(model, input, LayerSelector::initial);

    // scaling the stem conv by k > 0 rescales every activation channel
    // (eval-mode bn and relu are positively homogeneous here)
    double k = rng.range(0.5, 4.0);
    auto& stem = std::get<Conv2d>(model.layers()[0].layer);
    for (double& w : stem.weight.values_mut()) w *= k;
    FeatureMapSet scaled = extract_feature_maps(model, input, LayerSelector::initial);

    for (std::size_t i = 0; i < base.normalized.size(); ++i)
      CHECK(scaled.normalized[i] == doctest::Approx(base.normalized[i]).epsilon(1e-9));
  }
}

TEST_CASE("feature map PGM export writes tiles and a montage") {
  Model model = build_mini_resnet18(4, 32, kLabels, 16, 9);
  Tensor input = Tensor::full({3, 32, 32}, 0.1);
  FeatureMapSet maps = extract_feature_maps(model, input, LayerSelector::initial);
  auto dir = std::filesystem::temp_directory_path() / "binbrain_eval_tests" / "maps";
  std::filesystem::remove_all(dir);
  write_feature_map_pgms(maps, dir, "initial");
  CHECK(std::filesystem::exists(dir / "initial_ch0.pgm"));
  CHECK(std::filesystem::exists(dir / "initial_ch3.pgm"));
  CHECK(std::filesystem::exists(dir / "initial_montage.pgm"));
  auto bytes = read_file_bytes(dir / "initial_ch0.pgm");
  CHECK(bytes.size() > 15);
  CHECK(bytes[0] == 'P');
  CHECK(bytes[1] == '5');
}
