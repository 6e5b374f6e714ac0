#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include <doctest.h>

#include "binbrain/data.hpp"
#include "binbrain/errors.hpp"
#include "binbrain/util.hpp"

using namespace binbrain;

namespace {

namespace fs = std::filesystem;

fs::path test_dir() {
  auto dir = fs::temp_directory_path() / "binbrain_data_tests";
  fs::create_directories(dir);
  return dir;
}

Image random_image(int w, int h, Rng& rng) {
  Image img = make_image(w, h);
  for (Rgb& px : img.pixels)
    px = {static_cast<std::uint8_t>(rng.index(256)), static_cast<std::uint8_t>(rng.index(256)),
          static_cast<std::uint8_t>(rng.index(256))};
  return img;
}

DatasetManifest manifest_with_counts(const std::array<std::size_t, 4>& counts) {
  DatasetManifest m;
  for (std::size_t label = 0; label < 4; ++label)
    for (std::size_t i = 0; i < counts[label]; ++i)
      m.records.push_back({label_vocabulary()[label] + "/" + std::to_string(i) + ".ppm", label});
  return m;
}

}  // namespace

TEST_CASE("manifest parsing: counts, unknown labels, malformed rows") {
  auto dir = test_dir();
  auto path = dir / "manifest.csv";

  write_file_text(path, "path,label\na.ppm,glass\nb.ppm,metal\nc.ppm,paper\nd.ppm,plastic\n");
  DatasetManifest m = load_manifest(path);
  CHECK(m.size() == 4);
  CHECK(m.label_counts() == std::array<std::size_t, 4>{1, 1, 1, 1});

  write_file_text(path, "path,label\na.ppm,cardboard\n");
  CHECK_THROWS_WITH_AS((void)load_manifest(path), doctest::Contains("UnknownLabel"), Error);

  write_file_text(path, "path,label\n");
  CHECK_THROWS_WITH_AS((void)load_manifest(path), doctest::Contains("EmptyManifest"), Error);

  write_file_text(path, "path,label\na.ppm,glass\na.ppm,metal\n");
  CHECK_THROWS_WITH_AS((void)load_manifest(path), doctest::Contains("DuplicatePath"), Error);

  write_file_text(path, "path,label\nbroken line without comma\n");
  CHECK_THROWS_WITH_AS((void)load_manifest(path), doctest::Contains(":2"), Error);

  write_file_text(path, "wrong,header\n");
  CHECK_THROWS_AS((void)load_manifest(path), Error);
}

TEST_CASE("ppm decode: red pixel, unsupported maxval, short raster") {
  auto dir = test_dir();

  auto red = dir / "red.ppm";
  write_file_text(red, std::string("P6\n1 1\n255\n") + "\xff" + std::string(2, '\0'));
  Image img = decode_image(red);
  CHECK(img.width == 1);
  CHECK(img.pixels[0] == Rgb{255, 0, 0});

  auto deep = dir / "deep.ppm";
  write_file_text(deep, "P6\n1 1\n65535\n");
  CHECK_THROWS_WITH_AS((void)decode_image(deep), doctest::Contains("UnsupportedFormat"), Error);

  auto short_raster = dir / "short.ppm";
  write_file_text(short_raster, std::string("P6\n2 2\n255\n") + std::string(9, 'x'));  // 3 of 4 pixels
  CHECK_THROWS_WITH_AS((void)decode_image(short_raster), doctest::Contains("CorruptFile"), Error);

  auto not_ppm = dir / "what.ppm";
  write_file_text(not_ppm, "GIF89a");
  CHECK_THROWS_WITH_AS((void)decode_image(not_ppm), doctest::Contains("UnsupportedFormat"), Error);
}

TEST_CASE("ppm round-trip through write and decode") {
  Rng rng(3);
  Image img = random_image(7, 5, rng);
  auto path = test_dir() / "roundtrip.ppm";
  write_ppm(path, img);
  CHECK(decode_image(path) == img);
}

TEST_CASE("square_resize: identity, constants, and the bilinear formula") {
  Rng rng(5);
  Image square = random_image(8, 8, rng);
  CHECK(square_resize(square, 8) == square);

  Image flat = make_image(13, 9, {31, 77, 200});
  Image resized = square_resize(flat, 5);
  CHECK(resized.width == 5);
  for (const Rgb& px : resized.pixels) CHECK(px == Rgb{31, 77, 200});

  // half-pixel-center formula recomputed longhand over a 4x4 gradient
  Image grad = make_image(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      auto v = static_cast<std::uint8_t>(16 * (y * 4 + x));
      grad.at(x, y) = {v, v, v};
    }
  Image down = square_resize(grad, 2);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) {
      double sx = (x + 0.5) * 2.0 - 0.5;
      double sy = (y + 0.5) * 2.0 - 0.5;
      int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      double wx = sx - x0, wy = sy - y0;
      double want = (1 - wx) * (1 - wy) * grad.at(x0, y0).r + wx * (1 - wy) * grad.at(x0 + 1, y0).r +
                    (1 - wx) * wy * grad.at(x0, y0 + 1).r + wx * wy * grad.at(x0 + 1, y0 + 1).r;
      double rgb[3];
      bilinear_sample(grad, sx, sy, rgb);
      CHECK(std::abs(rgb[0] - want) < 1e-9);
      CHECK(down.at(x, y).r == static_cast<std::uint8_t>(std::lround(want)));
    }
}

TEST_CASE("property: square_resize hits the target size and keeps constants") {
  for (int side = 1; side <= 64; side += 7) {
    Image flat = make_image(side, std::max(1, side - 3), {90, 14, 210});
    Image out = square_resize(flat, 11);
    CHECK(out.width == 11);
    CHECK(out.height == 11);
    for (const Rgb& px : out.pixels) CHECK(px == Rgb{90, 14, 210});
  }
}

TEST_CASE("channel statistics: constant image, two-point set, brute-force agreement") {
  auto dir = test_dir() / "stats_set";
  fs::create_directories(dir);

  write_ppm(dir / "gray.ppm", make_image(4, 4, {128, 128, 128}));
  DatasetManifest gray;
  gray.root = dir;
  gray.records = {{"gray.ppm", 0}};
  ChannelStats stats = compute_channel_stats(gray, 4);
  for (int c = 0; c < 3; ++c) {
    CHECK(stats.mean[c] == doctest::Approx(128.0 / 255.0).epsilon(1e-12));
    CHECK(stats.std_dev[c] == 1e-6);  // clamped
  }

  write_ppm(dir / "black.ppm", make_image(4, 4, {0, 0, 0}));
  write_ppm(dir / "white.ppm", make_image(4, 4, {255, 255, 255}));
  DatasetManifest two;
  two.root = dir;
  two.records = {{"black.ppm", 0}, {"white.ppm", 1}};
  ChannelStats bw = compute_channel_stats(two, 4);
  for (int c = 0; c < 3; ++c) {
    CHECK(bw.mean[c] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(bw.std_dev[c] == doctest::Approx(0.5).epsilon(1e-12));
  }

  // single-pass brute-force accumulation over random images
  Rng rng(7);
  DatasetManifest rnd;
  rnd.root = dir;
  for (int i = 0; i < 3; ++i) {
    std::string name = "rnd" + std::to_string(i) + ".ppm";
    write_ppm(dir / name, random_image(6, 6, rng));
    rnd.records.push_back({name, 0});
  }
  ChannelStats got = compute_channel_stats(rnd, 6);
  std::array<double, 3> sum{}, sumsq{};
  std::size_t count = 0;
  for (const auto& rec : rnd.records) {
    Image img = square_resize(decode_image(dir / rec.path), 6);
    for (const Rgb& px : img.pixels) {
      std::array<double, 3> v = {px.r / 255.0, px.g / 255.0, px.b / 255.0};
      for (int c = 0; c < 3; ++c) {
        sum[c] += v[c];
        sumsq[c] += v[c] * v[c];
      }
      ++count;
    }
  }
  for (int c = 0; c < 3; ++c) {
    double mean = sum[c] / static_cast<double>(count);
    double var = sumsq[c] / static_cast<double>(count) - mean * mean;
    CHECK(std::abs(got.mean[c] - mean) < 1e-9);
    CHECK(std::abs(got.std_dev[c] - std::sqrt(var)) < 1e-9);
  }

  // decode failures carry the file attribution
  DatasetManifest missing;
  missing.root = dir;
  missing.records = {{"absent.ppm", 0}};
  CHECK_THROWS_WITH_AS((void)compute_channel_stats(missing, 4), doctest::Contains("absent.ppm"), Error);
}

TEST_CASE("stats csv round-trip preserves every bit") {
  ChannelStats stats{{0.60675459354230085, 0.5852166367838588, 0.565204377558798},
                     {0.1829832537916729, 0.18234821593442231, 0.1926306225491462}};
  auto path = test_dir() / "stats.csv";
  write_stats_csv(path, stats);
  ChannelStats back = read_stats_csv(path);
  CHECK(back.mean == stats.mean);
  CHECK(back.std_dev == stats.std_dev);
  CHECK(read_file_text(path).starts_with("channel,mean,std\n"));
}

TEST_CASE("normalize_image: zeroing, identity stats, affine inverse") {
  // a uniform image whose scaled value equals the channel mean comes out zero
  ChannelStats table{{0.6068, 0.5852, 0.5652}, {0.1830, 0.1823, 0.1926}};
  auto red_level = static_cast<std::uint8_t>(std::lround(table.mean[0] * 255.0));
  table.mean[0] = red_level / 255.0;  // align exactly with an 8-bit level
  Image uniform = make_image(4, 4, {red_level, 10, 20});
  Tensor norm = normalize_image(uniform, table);
  for (std::size_t i = 0; i < 16; ++i) CHECK(norm.values()[i] == 0.0);

  ChannelStats identity{{0, 0, 0}, {1, 1, 1}};
  Image img = make_image(2, 2, {51, 102, 204});
  Tensor plain = normalize_image(img, identity);
  CHECK(plain.values()[0] == doctest::Approx(51.0 / 255.0).epsilon(1e-15));
  CHECK(plain.values()[4] == doctest::Approx(102.0 / 255.0).epsilon(1e-15));

  Rng rng(8);
  Image any = random_image(5, 5, rng);
  ChannelStats stats{{0.3, 0.5, 0.7}, {0.21, 0.11, 0.41}};
  auto recovered = denormalize(normalize_image(any, stats), stats);
  std::size_t plane = 25;
  for (std::size_t i = 0; i < plane; ++i) {
    CHECK(std::abs(recovered[i] - any.pixels[i].r / 255.0) < 1e-12);
    CHECK(std::abs(recovered[plane + i] - any.pixels[i].g / 255.0) < 1e-12);
    CHECK(std::abs(recovered[2 * plane + i] - any.pixels[i].b / 255.0) < 1e-12);
  }

  CHECK_THROWS_WITH_AS((void)normalize_image(make_image(3, 4), stats), doctest::Contains("NotSquare"),
                       Error);
  CHECK_THROWS_WITH_AS((void)normalize_image(make_image(4, 4), stats, 8),
                       doctest::Contains("SizeMismatch"), Error);
}

TEST_CASE("augment: degenerate policy is the identity, flips are involutions") {
  Rng rng(9);
  Image img = random_image(12, 12, rng);

  AugmentPolicy degenerate;
  CHECK(augment(img, degenerate, 0) == img);
  CHECK(augment(img, degenerate, 123) == img);

  AugmentPolicy flip;
  flip.horizontal_flip_prob = 1.0;
  Image once = augment(img, flip, 5);
  CHECK(once != img);
  CHECK(flip_horizontal(once) == img);  // flipping back restores

  AugmentPolicy invalid;
  invalid.zoom_lo = 1.5;
  CHECK_THROWS_AS((void)augment(img, invalid, 0), Error);
}

TEST_CASE("augment replays bit-exactly per (seed, index)") {
  Rng rng(10);
  Image img = random_image(16, 16, rng);
  AugmentPolicy policy;
  policy.horizontal_flip_prob = 0.5;
  policy.crop_padding = 3;
  policy.zoom_lo = 0.8;
  policy.zoom_hi = 1.25;
  policy.seed = 99;

  CHECK(augment(img, policy, 7) == augment(img, policy, 7));
  bool any_difference = false;
  for (std::uint64_t idx = 0; idx < 6 && !any_difference; ++idx)
    any_difference = !(augment(img, policy, idx) == augment(img, policy, idx + 100));
  CHECK(any_difference);

  for (std::uint64_t idx = 0; idx < 16; ++idx) {
    Image out = augment(img, policy, idx);
    CHECK(out.width == 16);
    CHECK(out.height == 16);
  }
}

TEST_CASE("split honors the per-label floor rule on the published counts") {
  DatasetManifest manifest = manifest_with_counts({776, 590, 868, 868});  // glass, metal, paper, plastic
  auto [train, val] = split_dataset(manifest, 0.8, 7);
  CHECK(train.label_counts() == std::array<std::size_t, 4>{620, 472, 694, 694});
  CHECK(train.size() == 2480);
  CHECK(val.size() == 622);
  CHECK(val.label_counts() == std::array<std::size_t, 4>{156, 118, 174, 174});
}

TEST_CASE("split is deterministic, stratified, disjoint, exhaustive") {
  DatasetManifest manifest = manifest_with_counts({9, 7, 5, 11});
  auto [t1, v1] = split_dataset(manifest, 0.6, 3);
  auto [t2, v2] = split_dataset(manifest, 0.6, 3);
  auto [t3, v3] = split_dataset(manifest, 0.6, 4);

  auto paths = [](const DatasetManifest& m) {
    std::set<std::string> s;
    for (const auto& r : m.records) s.insert(r.path);
    return s;
  };
  CHECK(paths(t1) == paths(t2));
  CHECK(paths(v1) == paths(v2));
  CHECK(paths(t1) != paths(t3));                  // different permutation
  CHECK(t3.label_counts() == t1.label_counts());  // same stratified counts

  std::set<std::string> all = paths(manifest), train_set = paths(t1), val_set = paths(v1);
  std::set<std::string> unioned = train_set;
  unioned.insert(val_set.begin(), val_set.end());
  CHECK(unioned == all);
  for (const auto& p : val_set) CHECK(train_set.count(p) == 0);

  DatasetManifest pairs = manifest_with_counts({2, 2, 2, 2});
  auto [ht, hv] = split_dataset(pairs, 0.5, 1);
  CHECK(ht.label_counts() == std::array<std::size_t, 4>{1, 1, 1, 1});
  CHECK(hv.label_counts() == std::array<std::size_t, 4>{1, 1, 1, 1});

  // a label whose floor would empty the training side is an error
  DatasetManifest tiny = manifest_with_counts({1, 5, 5, 5});
  CHECK_THROWS_WITH_AS((void)split_dataset(tiny, 0.8, 1), doctest::Contains("LabelTooSmall"), Error);

  CHECK_THROWS_AS((void)split_dataset(manifest, 0.0, 1), Error);
  CHECK_THROWS_AS((void)split_dataset(manifest, 1.0, 1), Error);
}

TEST_CASE("property: split union/disjointness holds across seeds and fractions") {
  Rng rng(11);
  DatasetManifest manifest = manifest_with_counts({23, 17, 31, 12});
  for (int trial = 0; trial < 10; ++trial) {
    double fraction = rng.range(0.3, 0.9);
    std::uint64_t seed = rng.next();
    auto [train, val] = split_dataset(manifest, fraction, seed);
    CHECK(train.size() + val.size() == manifest.size());
    std::set<std::string> seen;
    for (const auto& r : train.records) CHECK(seen.insert(r.path).second);
    for (const auto& r : val.records) CHECK(seen.insert(r.path).second);
    auto counts = manifest.label_counts();
    auto tc = train.label_counts();
    for (std::size_t label = 0; label < 4; ++label)
      CHECK(tc[label] == static_cast<std::size_t>(std::floor(fraction * static_cast<double>(counts[label]))));
  }
}
