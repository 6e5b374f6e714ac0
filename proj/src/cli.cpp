#include "binbrain/cli.hpp"

#include <algorithm>
#include <iostream>
#include <sstream>
#include <set>

#include <CLI11.hpp>

#include "binbrain/checkpoint.hpp"
#include "binbrain/data.hpp"
#include "binbrain/errors.hpp"
#include "binbrain/eval.hpp"
#include "binbrain/kernels.hpp"
#include "binbrain/model.hpp"
#include "binbrain/sort.hpp"
#include "binbrain/svg.hpp"
#include "binbrain/synth.hpp"
#include "binbrain/train.hpp"
#include "binbrain/util.hpp"

namespace binbrain {

namespace {

namespace fs = std::filesystem;

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::non_finite_loss:
    case Errc::non_finite_gradient:
      return 3;
    case Errc::invalid_config:
    case Errc::unknown_policy:
    case Errc::unknown_selector:
    case Errc::unsupported_input_size:
      return 1;
    default:
      return 2;
  }
}

// Flat key=value config support. The file's keys become --key=value tokens
// appended to the argument list unless the user already passed that flag, so
// explicit flags always win. Unknown keys surface as ordinary parse errors.
std::vector<std::string> apply_config_file(std::vector<std::string> tokens) {
  std::string config_path;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == "--config") {
      if (i + 1 >= tokens.size()) fail(Errc::invalid_config, "--config needs a file path");
      config_path = tokens[i + 1];
      tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(i), tokens.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (tokens[i].rfind("--config=", 0) == 0) {
      config_path = tokens[i].substr(9);
      tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (config_path.empty()) return tokens;

  auto trim = [](std::string s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  std::istringstream in(read_file_text(config_path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(Errc::invalid_config, config_path + ":" + std::to_string(line_no) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      fail(Errc::invalid_config, config_path + ":" + std::to_string(line_no) + ": empty key");
    std::string flag = "--" + key;
    bool user_has = false;
    for (const auto& t : tokens)
      if (t == flag || t.rfind(flag + "=", 0) == 0) user_has = true;
    if (!user_has) tokens.push_back(flag + "=" + value);
  }
  return tokens;
}

struct CommonOptions {
  std::string manifest;
  std::string out_dir = "out";
  std::string arch = "mini_resnet18";
  int width = 16;
  int input_size = 64;
  int hidden = 256;
  std::uint64_t seed = 1;
  double fraction = 0.8;
  std::string stats_file;
};

void ensure_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) fail(Errc::unwritable_directory, dir.string());
}

struct TrainFlags {
  TrainConfig config;
  std::string freeze = "none";
  bool freeze_bn_stats = false;
  std::string init_checkpoint;  // transfer source, loaded with a fresh head
};

void add_train_flags(CLI::App* cmd, TrainFlags& flags) {
  cmd->add_option("--epochs", flags.config.epochs, "training epochs");
  cmd->add_option("--batch-size", flags.config.batch_size, "batch size");
  cmd->add_option("--lr", flags.config.learning_rate, "learning rate");
  cmd->add_option("--freeze", flags.freeze, "none|head_only|feature_extraction|fine_tune");
  cmd->add_option("--flip-prob", flags.config.augment.horizontal_flip_prob, "horizontal flip probability");
  cmd->add_option("--crop-padding", flags.config.augment.crop_padding, "random-crop padding");
  cmd->add_option("--zoom-lo", flags.config.augment.zoom_lo, "zoom lower bound");
  cmd->add_option("--zoom-hi", flags.config.augment.zoom_hi, "zoom upper bound");
  cmd->add_flag("--freeze-bn-stats", flags.freeze_bn_stats,
                "pin batch-norm running statistics during training");
  cmd->add_option("--saturation-delta", flags.config.saturation_delta, "saturation improvement threshold");
  cmd->add_option("--saturation-patience", flags.config.saturation_patience, "saturation window");
  cmd->add_option("--init-checkpoint", flags.init_checkpoint,
                  "start from this checkpoint's backbone (head re-initialized)");
}

ChannelStats resolve_stats(const CommonOptions& common, const DatasetManifest& train_manifest) {
  if (!common.stats_file.empty()) return read_stats_csv(common.stats_file);
  return compute_channel_stats(train_manifest, common.input_size);
}

struct PreparedRun {
  DatasetManifest train_manifest, val_manifest;
  LoadedDataset train_set, val_set;
  ChannelStats stats;
};

PreparedRun prepare_run(const CommonOptions& common) {
  PreparedRun run;
  DatasetManifest manifest = load_manifest(common.manifest);
  auto [train_m, val_m] = split_dataset(manifest, common.fraction, common.seed);
  run.stats = resolve_stats(common, train_m);
  run.train_set = load_dataset(train_m, common.input_size);
  run.val_set = load_dataset(val_m, common.input_size);
  run.train_manifest = std::move(train_m);
  run.val_manifest = std::move(val_m);
  return run;
}

Model build_or_transfer(const CommonOptions& common, const TrainFlags& flags,
                        const ChannelStats& stats) {
  Model model;
  if (!flags.init_checkpoint.empty()) {
    LoadOptions opts;
    opts.expected_arch = common.arch;
    opts.head_mode = HeadMode::reinit_head;
    opts.new_labels = label_vocabulary();
    opts.new_hidden = common.hidden;
    opts.head_seed = mix_seed(common.seed, 0x48454144ull);
    model = load_checkpoint(flags.init_checkpoint, opts);
  } else {
    model = build_model(common.arch, common.width, common.input_size, label_vocabulary(),
                        common.hidden, common.seed);
  }
  model.meta().stats = stats;
  return model;
}

TrainingReport run_training(Model& model, const PreparedRun& run, const CommonOptions& common,
                            TrainFlags& flags) {
  flags.config.seed = common.seed;
  flags.config.augment.seed = mix_seed(common.seed, 0x41554731ull);
  flags.config.freeze = freeze_policy_from_name(flags.freeze);
  flags.config.update_batchnorm_stats = !flags.freeze_bn_stats;
  return train(model, run.train_set, run.val_set, flags.config, run.stats);
}

void write_training_outputs(const fs::path& out_dir, const std::string& tag, Model& model,
                            const TrainingReport& report) {
  ensure_out_dir(out_dir);
  save_checkpoint(model, out_dir / (tag + "_checkpoint.bin"));
  write_report_csv(report, out_dir / (tag + "_report.csv"));
  write_file_text(out_dir / (tag + "_config.txt"), report.config_echo);
  write_line_chart_svg(out_dir / (tag + "_loss.svg"), tag + " loss", "epoch", "loss",
                       {{"train", report.train_loss}, {"val", report.val_loss}});
  write_line_chart_svg(out_dir / (tag + "_accuracy.svg"), tag + " accuracy", "epoch", "accuracy",
                       {{"train", report.train_accuracy}, {"val", report.val_accuracy}});
}

void print_report_summary(const std::string& tag, const TrainingReport& report) {
  std::cout << tag << ": final train_acc=" << fmt_fixed(report.train_accuracy.back(), 4)
            << " val_acc=" << fmt_fixed(report.val_accuracy.back(), 4)
            << " train_loss=" << fmt_fixed(report.train_loss.back(), 4)
            << " val_loss=" << fmt_fixed(report.val_loss.back(), 4);
  if (report.saturation_epoch)
    std::cout << " saturation_epoch=" << *report.saturation_epoch;
  std::cout << "\n";
}

int cmd_stats(const CommonOptions& common) {
  DatasetManifest manifest = load_manifest(common.manifest);
  ChannelStats stats = compute_channel_stats(manifest, common.input_size);
  ensure_out_dir(common.out_dir);
  write_stats_csv(fs::path(common.out_dir) / "stats.csv", stats);
  std::cout << "stats: mean=(" << fmt_g17(stats.mean[0]) << "," << fmt_g17(stats.mean[1]) << ","
            << fmt_g17(stats.mean[2]) << ") std=(" << fmt_g17(stats.std_dev[0]) << ","
            << fmt_g17(stats.std_dev[1]) << "," << fmt_g17(stats.std_dev[2]) << ")\n";
  return 0;
}

int cmd_split(const CommonOptions& common) {
  DatasetManifest manifest = load_manifest(common.manifest);
  auto [train_m, val_m] = split_dataset(manifest, common.fraction, common.seed);
  ensure_out_dir(common.out_dir);
  write_manifest(fs::path(common.out_dir) / "train.csv", train_m);
  write_manifest(fs::path(common.out_dir) / "val.csv", val_m);
  std::cout << "split: train=" << train_m.size() << " val=" << val_m.size() << "\n";
  return 0;
}

int cmd_train(const CommonOptions& common, TrainFlags& flags) {
  PreparedRun run = prepare_run(common);
  Model model = build_or_transfer(common, flags, run.stats);
  TrainingReport report = run_training(model, run, common, flags);
  write_training_outputs(common.out_dir, common.arch, model, report);
  write_stats_csv(fs::path(common.out_dir) / "stats.csv", run.stats);
  print_report_summary(common.arch, report);
  return 0;
}

int cmd_eval(const CommonOptions& common, const std::string& checkpoint) {
  LoadOptions opts;
  opts.expected_arch = "";  // accept whatever the checkpoint declares
  Model model = load_checkpoint(checkpoint, opts);
  DatasetManifest manifest = load_manifest(common.manifest);
  LoadedDataset dataset = load_dataset(manifest, model.meta().input_size);
  EvalResult result = evaluate(model, dataset, model.meta().stats);
  ensure_out_dir(common.out_dir);
  write_confusion_csv(result.confusion, fs::path(common.out_dir) / "confusion.csv");
  write_records_csv(result.records, model.meta().labels, fs::path(common.out_dir) / "records.csv");
  bool complete_rows = true;
  for (std::size_t r = 0; r < result.confusion.k(); ++r) {
    std::uint64_t row = 0;
    for (std::size_t c = 0; c < result.confusion.k(); ++c) row += result.confusion.at(r, c);
    complete_rows = complete_rows && row > 0;
  }
  if (complete_rows)
    write_heat_grid_svg(fs::path(common.out_dir) / "confusion.svg", "confusion (%)",
                        result.confusion.labels, row_normalize(result.confusion));
  std::cout << "eval: accuracy=" << fmt_fixed(result.accuracy, 4) << " over " << dataset.size()
            << " samples\n";
  return 0;
}

int cmd_compare(const CommonOptions& common, TrainFlags& flags, std::vector<std::string> archs,
                double overfit_margin) {
  if (archs.size() < 2) fail(Errc::invalid_config, "compare needs at least two --arch values");
  PreparedRun run = prepare_run(common);

  // repeated architectures get distinct run tags so outputs never collide
  std::vector<std::string> tags;
  std::map<std::string, int> uses;
  for (const auto& arch : archs) {
    int n = ++uses[arch];
    tags.push_back(n == 1 ? arch : arch + "_run" + std::to_string(n));
  }

  std::vector<TrainingReport> reports;
  std::vector<ChartSeries> loss_series;
  for (std::size_t i = 0; i < archs.size(); ++i) {
    CommonOptions arch_common = common;
    arch_common.arch = archs[i];
    TrainFlags arch_flags = flags;
    Model model = build_or_transfer(arch_common, arch_flags, run.stats);
    TrainingReport report = run_training(model, run, arch_common, arch_flags);
    write_training_outputs(common.out_dir, tags[i], model, report);
    print_report_summary(tags[i], report);
    loss_series.push_back({tags[i] + " train", report.train_loss});
    loss_series.push_back({tags[i] + " val", report.val_loss});
    reports.push_back(std::move(report));
  }

  // merged per-epoch CSV
  std::string merged = "epoch";
  for (const auto& tag : tags)
    merged += "," + tag + "_train_loss," + tag + "_val_loss," + tag + "_train_acc," + tag + "_val_acc";
  merged += "\n";
  std::size_t epochs = reports.front().train_loss.size();
  for (std::size_t e = 0; e < epochs; ++e) {
    merged += std::to_string(e + 1);
    for (const auto& r : reports)
      merged += "," + fmt_g17(r.train_loss[e]) + "," + fmt_g17(r.val_loss[e]) + "," +
                fmt_g17(r.train_accuracy[e]) + "," + fmt_g17(r.val_accuracy[e]);
    merged += "\n";
  }
  write_file_text(fs::path(common.out_dir) / "comparison.csv", merged);
  write_line_chart_svg(fs::path(common.out_dir) / "comparison_loss.svg", "loss comparison", "epoch",
                       "loss", loss_series);

  // Overfit flag: largest val-above-train loss gap reaching the margin.
  for (std::size_t i = 0; i < tags.size(); ++i) {
    double gap = 0.0;
    for (std::size_t e = 0; e < reports[i].train_loss.size(); ++e)
      gap = std::max(gap, std::max(0.0, reports[i].val_loss[e] - reports[i].train_loss[e]));
    bool flagged = gap >= overfit_margin;
    std::cout << tags[i] << ": overfit_gap=" << fmt_fixed(gap, 4)
              << (flagged ? " FLAGGED" : " ok") << "\n";
  }
  return 0;
}

int cmd_feature_maps(const CommonOptions& common, const std::string& checkpoint,
                     const std::string& image_path, const std::string& layer) {
  Model model = load_checkpoint(checkpoint);
  Image img = square_resize(decode_image(image_path), model.meta().input_size);
  Tensor input = normalize_image(img, model.meta().stats, model.meta().input_size);
  ensure_out_dir(common.out_dir);
  std::vector<std::string> layers;
  if (layer == "all")
    layers = {"initial", "middle", "last"};
  else
    layers = {layer};
  for (const auto& l : layers) {
    FeatureMapSet maps = extract_feature_maps(model, input, layer_selector_from_name(l));
    write_feature_map_pgms(maps, common.out_dir, l);
    std::cout << "feature-maps: " << l << " <- " << maps.layer_path << " ("
              << maps.shape[0] << " channels of " << maps.shape[1] << "x" << maps.shape[2] << ")\n";
  }
  return 0;
}

int cmd_sort(const CommonOptions& common, const std::string& checkpoint, const std::string& images,
             double threshold) {
  Model model = load_checkpoint(checkpoint);
  RouterConfig router;
  router.threshold = threshold;

  std::vector<fs::path> items;
  fs::path source(images);
  if (fs::is_directory(source)) {
    for (const auto& entry : fs::recursive_directory_iterator(source))
      if (entry.is_regular_file() && entry.path().extension() == ".ppm") items.push_back(entry.path());
    std::sort(items.begin(), items.end());
  } else {
    items.push_back(source);
  }

  StreamResult result = run_stream(model, items, router);
  ensure_out_dir(common.out_dir);
  write_decision_log_csv(result, model.meta().labels, fs::path(common.out_dir) / "decisions.csv");
  std::cout << "sort: items=" << result.log.size();
  for (std::size_t c = 0; c < result.tallies.size(); ++c)
    std::cout << " c" << c << "=" << result.tallies[c];
  std::cout << "\n";
  return 0;
}

int cmd_gen_synthetic(const CommonOptions& common, int per_class, int size) {
  SynthConfig config{per_class, size, common.seed};
  DatasetManifest manifest = generate_synthetic_dataset(common.out_dir, config);
  std::cout << "gen-synthetic: " << manifest.size() << " images under " << common.out_dir << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"binbrain: desk-scale waste-image classifier and bin router"};
  app.require_subcommand(1);

  CommonOptions common;
  TrainFlags train_flags;
  std::string checkpoint, image_path, images_dir;
  std::string layer = "all";
  std::vector<std::string> compare_archs;
  double overfit_margin = 0.5;
  double threshold = 0.6;
  int per_class = 10;
  int synth_size = 64;

  std::string config_doc_slot;  // consumed before parsing; registered for --help
  auto add_common = [&](CLI::App* cmd, bool with_model) {
    cmd->add_option("--config", config_doc_slot, "flat key=value config file; flags override it");
    cmd->add_option("--out-dir", common.out_dir, "output directory");
    cmd->add_option("--seed", common.seed, "master seed");
    if (with_model) {
      cmd->add_option("--arch", common.arch, "mini_resnet18|mini_vgg");
      cmd->add_option("--width", common.width, "base channel count");
      cmd->add_option("--input-size", common.input_size, "square input size (32/64/128/512)");
      cmd->add_option("--hidden", common.hidden, "classifier hidden width");
    }
  };

  CLI::App* stats = app.add_subcommand("stats", "channel mean/std of a manifest");
  stats->add_option("--manifest", common.manifest, "dataset manifest CSV")->required();
  stats->add_option("--input-size", common.input_size, "preprocessing size");
  add_common(stats, false);

  CLI::App* split = app.add_subcommand("split", "stratified train/val split");
  split->add_option("--manifest", common.manifest)->required();
  split->add_option("--fraction", common.fraction, "train fraction");
  add_common(split, false);

  CLI::App* train_cmd = app.add_subcommand("train", "train a model end to end");
  train_cmd->add_option("--manifest", common.manifest)->required();
  train_cmd->add_option("--fraction", common.fraction, "train fraction");
  train_cmd->add_option("--stats", common.stats_file, "reuse a stats CSV instead of recomputing");
  add_common(train_cmd, true);
  add_train_flags(train_cmd, train_flags);

  CLI::App* eval_cmd = app.add_subcommand("eval", "confusion matrix over a manifest");
  eval_cmd->add_option("--checkpoint", checkpoint)->required();
  eval_cmd->add_option("--manifest", common.manifest)->required();
  add_common(eval_cmd, false);

  CLI::App* compare = app.add_subcommand("compare", "train several architectures side by side");
  compare->add_option("--manifest", common.manifest)->required();
  compare->add_option("--arch", compare_archs, "architecture (repeat)")->required();
  compare->add_option("--fraction", common.fraction);
  compare->add_option("--stats", common.stats_file);
  compare->add_option("--overfit-margin", overfit_margin, "val-train loss gap that flags a run");
  compare->add_option("--width", common.width);
  compare->add_option("--input-size", common.input_size);
  compare->add_option("--hidden", common.hidden);
  add_common(compare, false);
  add_train_flags(compare, train_flags);

  CLI::App* fmaps = app.add_subcommand("feature-maps", "export activation grids as PGM");
  fmaps->add_option("--checkpoint", checkpoint)->required();
  fmaps->add_option("--image", image_path)->required();
  fmaps->add_option("--layer", layer, "initial|middle|last|all");
  add_common(fmaps, false);

  CLI::App* sort_cmd = app.add_subcommand("sort", "route images into bin compartments");
  sort_cmd->add_option("--checkpoint", checkpoint)->required();
  sort_cmd->add_option("--images", images_dir, "PPM file or directory")->required();
  sort_cmd->add_option("--threshold", threshold, "confidence gate");
  add_common(sort_cmd, false);

  CLI::App* gen = app.add_subcommand("gen-synthetic", "procedural 4-class dataset");
  gen->add_option("--per-class", per_class, "images per class (>= 2)");
  gen->add_option("--size", synth_size, "image side length");
  add_common(gen, false);

  std::vector<std::string> tokens(argv + 1, argv + argc);
  try {
    tokens = apply_config_file(std::move(tokens));
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  }
  std::vector<const char*> expanded = {argv[0]};
  for (const auto& t : tokens) expanded.push_back(t.c_str());

  try {
    app.parse(static_cast<int>(expanded.size()), expanded.data());
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help() << "\n";
    return 1;
  }

  try {
    if (stats->parsed()) return cmd_stats(common);
    if (split->parsed()) return cmd_split(common);
    if (train_cmd->parsed()) return cmd_train(common, train_flags);
    if (eval_cmd->parsed()) return cmd_eval(common, checkpoint);
    if (compare->parsed()) return cmd_compare(common, train_flags, compare_archs, overfit_margin);
    if (fmaps->parsed()) return cmd_feature_maps(common, checkpoint, image_path, layer);
    if (sort_cmd->parsed()) return cmd_sort(common, checkpoint, images_dir, threshold);
    if (gen->parsed()) return cmd_gen_synthetic(common, per_class, synth_size);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace binbrain
