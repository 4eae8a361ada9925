#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "drivegaze/analysis.hpp"
#include "drivegaze/checkpoint.hpp"
#include "drivegaze/dataset_io.hpp"
#include "drivegaze/image.hpp"
#include "drivegaze/metrics.hpp"
#include "drivegaze/synth.hpp"
#include "drivegaze/training.hpp"

namespace drivegaze::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kLockName = ".drivegaze.lock";

/// Exclusive marker file in an output directory, removed on destruction.
class DirectoryLock {
 public:
  explicit DirectoryLock(const fs::path& dir) : path_(dir / kLockName) {
    fs::create_directories(dir);
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) {
      throw std::runtime_error("output directory " + dir.string() + " is locked by another run (remove " +
                               path_.string() + " if stale)");
    }
    std::fclose(f);
  }
  ~DirectoryLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  fs::path path_;
};

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9f", v);
  return buf;
}

std::uint64_t seed_of(const RunConfig& c) {
  if (!c.seed) throw UsageError("--seed is mandatory");
  return *c.seed;
}

void require_dataset(const RunConfig& c) {
  if (c.dataset.empty()) throw UsageError("--dataset is required");
  if (!fs::is_directory(c.dataset)) throw std::runtime_error("dataset " + c.dataset.string() + " does not exist");
}

NetConfig net_config(const RunConfig& c) {
  const Architecture arch = parse_architecture(c.arch);
  NetConfig n = c.tiny ? NetConfig::tiny(arch) : NetConfig::full(arch);
  if (c.refine_resolution != 0) n.refine_resolution = c.refine_resolution;
  n.validate();
  return n;
}

CropPolicy crop_policy_of(const RunConfig& c, Architecture arch) {
  if (c.crop_policy.empty()) return arch == Architecture::Coarse ? CropPolicy::Mild : CropPolicy::Aggressive;
  return parse_crop_policy(c.crop_policy);
}

struct LoadedData {
  std::vector<Sequence> sequences;
  DatasetSplit split;
};

LoadedData load_data(const RunConfig& c, bool segmentation, std::ostream& err) {
  require_dataset(c);
  LoadedData d;
  std::vector<std::string> warnings;
  d.sequences = read_dataset(c.dataset, LoadOptions{segmentation}, &warnings);
  if (d.sequences.empty()) throw std::runtime_error("dataset " + c.dataset.string() + " lists no sequences");
  SplitConfig sc;
  sc.validation_frames = c.validation_frames;
  sc.test_sequences = c.test_sequences;
  if (sc.test_sequences.empty()) {
    const std::size_t n = d.sequences.size();
    const std::size_t n_test = std::min(n - 1, (n + 2) / 3);
    for (std::size_t i = n - n_test; i < n; ++i) sc.test_sequences.push_back(d.sequences[i].id);
  }
  d.split = split(d.sequences, sc);
  warnings.insert(warnings.end(), d.split.warnings.begin(), d.split.warnings.end());
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  return d;
}

const std::vector<ClipRef>& split_clips(const LoadedData& d, const std::string& name) {
  if (name == "train") return d.split.train;
  if (name == "validation") return d.split.validation;
  if (name == "test") return d.split.test;
  throw UsageError("unknown split '" + name + "' (expected train | validation | test)");
}

std::vector<ClipRef> strided(const std::vector<ClipRef>& clips, std::size_t stride) {
  if (stride == 0) throw UsageError("eval_stride must be positive");
  std::vector<ClipRef> out;
  for (std::size_t i = 0; i < clips.size(); i += stride) out.push_back(clips[i]);
  return out;
}

std::vector<Tensor> training_maps(const LoadedData& d) {
  std::vector<Tensor> maps;
  maps.reserve(d.split.train.size());
  for (const auto& r : d.split.train) maps.push_back(d.sequences[r.sequence].maps[r.end_index]);
  if (maps.empty()) throw std::runtime_error("training split is empty; mean_gt baseline undefined");
  return maps;
}

Checkpoint load_model(const RunConfig& c) {
  if (c.checkpoint.empty()) throw UsageError("--checkpoint is required for model predictions");
  if (!fs::exists(c.checkpoint)) throw std::runtime_error("checkpoint " + c.checkpoint.string() + " does not exist");
  return load_checkpoint(c.checkpoint, net_config(c));
}

/// Model prediction resampled to the ground-truth extent and max-normalised.
Tensor predict_native(const Sequence& seq, std::size_t end_index, const ModelParams& params) {
  Tensor pred = predict(make_clip(seq, end_index), params);
  const Tensor& gt = seq.maps.at(end_index);
  if (pred.shape() != gt.shape()) pred = image::resize_bilinear(pred, gt.dim(1), gt.dim(2));
  return image::max_normalized(pred);
}

}  // namespace

void cmd_synth(const RunConfig& c, std::ostream& out, std::ostream&) {
  if (c.dataset.empty()) throw UsageError("--dataset (output root) is required");
  SynthConfig sc;
  sc.sequences = c.sequences;
  sc.frames = c.frames;
  sc.height = c.height;
  sc.width = c.width;
  sc.event_fraction = c.event_fraction;
  const auto generated = synth_generate(sc, seed_of(c));
  DirectoryLock lock(c.dataset);
  write_dataset(c.dataset, generated);

  out << "wrote " << generated.size() << " sequences to " << c.dataset.string() << '\n';
  std::size_t total = 0;
  for (const auto& row : read_manifest(c.dataset)) {
    out << "  " << row.sequence_id << "  " << to_string(row.landscape) << "  " << row.frames << " frames  "
        << row.height << "x" << row.width << '\n';
    total += row.frames;
  }
  out << "total frames: " << total << '\n';
}

void cmd_train(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const NetConfig net = net_config(c);
  const std::uint64_t seed = seed_of(c);
  if (c.steps == 0) throw UsageError("steps must be positive");
  if (c.batch_size == 0) throw UsageError("batch_size must be positive");
  if (c.log_interval == 0) throw UsageError("log_interval must be positive");
  if (!c.resume.empty() && !fs::exists(c.resume)) {
    throw std::runtime_error("resume checkpoint " + c.resume.string() + " does not exist");
  }
  LoadedData d = load_data(c, false, err);
  if (d.split.train.empty()) throw std::runtime_error("no training clips after the split");
  DirectoryLock lock(c.output);

  AdamConfig adam;
  adam.learning_rate = c.learning_rate;
  ModelParams params;
  Optimizer optimizer;
  if (!c.resume.empty()) {
    Checkpoint ckpt = load_checkpoint(c.resume, net);
    params = std::move(ckpt.params);
    if (ckpt.optimizer) {
      optimizer = std::move(*ckpt.optimizer);
      for (auto& s : optimizer.states()) s.config = adam;
    } else {
      err << "warning: " << c.resume.string() << " has no optimizer state; Adam restarts at step 0\n";
      optimizer = Optimizer(params, adam);
    }
    out << "resuming from " << c.resume.string() << " at step " << optimizer.step_count() << '\n';
  } else {
    params = init_params(net, seed);
    optimizer = Optimizer(params, adam);
  }

  TrainOptions opts;
  opts.policy = crop_policy_of(c, net.arch);
  opts.steps = c.steps;
  opts.batch_size = c.batch_size;
  opts.seed = seed;
  opts.log_interval = c.log_interval;
  opts.validation_stride = c.validation_stride;

  out << "training " << to_string(net.arch) << (c.tiny ? " (tiny)" : "") << ": " << params.parameter_count()
      << " parameters, " << d.split.train.size() << " training clips, " << d.split.validation.size()
      << " validation clips, crop " << to_string(opts.policy) << '\n';

  auto log = open_output(c.output / "loss_log.csv");
  log << "step,loss1,loss2,validation_cc\n";
  train_loop(params, optimizer, d.sequences, d.split, opts, [&](const LogRow& row) {
    const std::string vcc = row.validation_cc ? fmt(*row.validation_cc) : "undefined";
    log << row.step << ',' << fmt(row.loss1) << ',' << fmt(row.loss2) << ',' << vcc << '\n';
    log.flush();
    out << "step " << row.step << "  loss1 " << fmt(row.loss1) << "  loss2 " << fmt(row.loss2) << "  val_cc " << vcc
        << '\n';
    out.flush();
  });

  const fs::path ckpt = c.checkpoint.empty() ? c.output / "model.ckpt" : c.checkpoint;
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  save_checkpoint(ckpt, params, &optimizer);
  out << "checkpoint written to " << ckpt.string() << '\n';
}

void cmd_eval(const RunConfig& c, std::ostream& out, std::ostream& err) {
  if (c.predictor.empty()) throw UsageError("eval needs --predictor model | gaussian | mean_gt");
  if (c.predictor != "model" && c.predictor != "gaussian" && c.predictor != "mean_gt") {
    throw UsageError("unknown predictor '" + c.predictor + "' (expected model | gaussian | mean_gt)");
  }
  seed_of(c);
  LoadedData d = load_data(c, false, err);
  const auto clips = strided(split_clips(d, c.split), c.eval_stride);
  if (clips.empty()) throw std::runtime_error("split '" + c.split + "' holds no clips");

  metrics::MapPredictor predictor;
  std::optional<Checkpoint> model;
  if (c.predictor == "model") {
    model = load_model(c);
    predictor = [&model](const Sequence& s, std::size_t e) { return predict_native(s, e, model->params); };
  } else if (c.predictor == "gaussian") {
    const auto g = metrics::gaussian_baseline(d.sequences.front().height(), d.sequences.front().width(),
                                              c.sigma_fraction);
    predictor = [g](const Sequence&, std::size_t) { return g.map; };
  } else {
    const auto maps = training_maps(d);
    const auto m = metrics::mean_gt_baseline(maps);
    predictor = [m](const Sequence&, std::size_t) { return m.map; };
  }

  metrics::EvalOptions eo;
  for (const auto& seq : d.sequences) {
    eo.hard_frames.push_back(analysis::select_hard_subsequences(seq.maps, c.window).frame_mask(seq.length()));
  }
  DirectoryLock lock(c.output);
  auto report = metrics::evaluate(predictor, d.sequences, clips, eo);
  report.predictor = c.predictor;
  report.sigma_fraction = c.sigma_fraction;
  const fs::path path = c.output / ("metrics_" + c.predictor + "_" + c.split + ".csv");
  auto f = open_output(path);
  report.write_csv(f);

  const auto all = [](const metrics::ClipScore&) { return true; };
  const auto hard = [](const metrics::ClipScore& s) { return s.hard; };
  const auto cc_all = report.cc_aggregate(all), kl_all = report.kl_aggregate(all);
  const auto cc_hard = report.cc_aggregate(hard), kl_hard = report.kl_aggregate(hard);
  out << c.predictor << " on " << c.split << " (" << report.clips.size() << " clips)\n";
  out << "  full: CC " << fmt(cc_all.mean) << " +- " << fmt(cc_all.std) << "  KL " << fmt(kl_all.mean) << " +- "
      << fmt(kl_all.std) << '\n';
  out << "  hard: CC " << fmt(cc_hard.mean) << " +- " << fmt(cc_hard.std) << "  KL " << fmt(kl_hard.mean) << " +- "
      << fmt(kl_hard.std) << "  (" << kl_hard.count << " clips)\n";
  out << "report written to " << path.string() << '\n';
}

void cmd_analyze(const RunConfig& c, std::ostream& out, std::ostream& err) {
  seed_of(c);
  LoadedData d = load_data(c, true, err);
  std::optional<Checkpoint> model;
  if (!c.checkpoint.empty()) model = load_model(c);
  DirectoryLock lock(c.output);
  const fs::path images = c.output / "images";
  fs::create_directories(images);

  // Speed buckets over every frame of the dataset.
  const auto buckets = analysis::speed_bucket_maps(d.sequences);
  {
    auto f = open_output(c.output / "speed_buckets.csv");
    analysis::write_bucket_csv(f, buckets);
    for (std::size_t b = 0; b < analysis::kSpeedBuckets; ++b) {
      if (buckets.buckets[b].empty()) continue;
      analysis::write_pgm(images / (std::string("bucket_") + static_cast<char>('a' + b) + ".pgm"),
                          buckets.buckets[b].mean_map);
    }
  }
  out << "speed buckets:";
  for (const auto& b : buckets.buckets) out << ' ' << b.count;
  out << '\n';

  // Sequence means and modes.
  {
    auto f = open_output(c.output / "sequence_modes.csv");
    f << "sequence_id,mode_y,mode_x\n";
    for (const auto& seq : d.sequences) {
      const auto mm = analysis::sequence_mean_and_mode(seq.maps);
      f << seq.id << ',' << mm.mode_y << ',' << mm.mode_x << '\n';
      analysis::write_pgm(images / ("mean_" + seq.id + ".pgm"), mm.mean);
    }
  }

  // Hard subsequences against each sequence's own mean map.
  {
    auto f = open_output(c.output / "hard_windows.csv");
    f << "sequence_id,begin,end,frames\n";
    std::size_t selected = 0, total = 0;
    for (const auto& seq : d.sequences) {
      const auto sel = analysis::select_hard_subsequences(seq.maps, c.window);
      total += seq.length();
      if (sel.unselectable) {
        err << "warning: sequence " << seq.id << " has a constant mean map; hard windows undefined\n";
        f << seq.id << ",unselectable,,\n";
        continue;
      }
      for (const auto& w : sel.windows) {
        f << seq.id << ',' << w.begin << ',' << w.end << ',' << w.size() << '\n';
        selected += w.size();
      }
    }
    out << "hard subsequences: " << selected << " of " << total << " frames\n";
  }

  const bool have_segmentation =
      std::all_of(d.sequences.begin(), d.sequences.end(), [](const Sequence& s) { return s.has_segmentation(); });
  if (have_segmentation) {
    std::vector<Tensor> maps;
    std::vector<LabelMap> segs;
    for (const auto& seq : d.sequences) {
      maps.insert(maps.end(), seq.maps.begin(), seq.maps.end());
      segs.insert(segs.end(), seq.segmentation.begin(), seq.segmentation.end());
    }
    const auto sweep = analysis::threshold_sweep(maps, segs, c.n_thresholds);
    auto f = open_output(c.output / "threshold_sweep.csv");
    analysis::write_sweep_csv(f, sweep, "gt");
    auto s = open_output(c.output / "category_trends.csv");
    analysis::write_slopes_csv(s, sweep, "gt");
    out << "threshold sweep: " << c.n_thresholds << " thresholds over " << maps.size() << " frames\n";
  } else {
    err << "warning: segmentation maps missing; threshold sweep skipped\n";
  }

  if (!model) return;

  // Prediction-side analyses over the evaluation split.
  const auto clips = strided(split_clips(d, c.split), c.eval_stride);
  if (clips.empty()) throw std::runtime_error("split '" + c.split + "' holds no clips");
  std::map<std::size_t, std::vector<std::size_t>> by_sequence;
  for (const auto& r : clips) by_sequence[r.sequence].push_back(r.end_index);

  std::vector<Tensor> pred_maps, gt_maps;
  std::vector<LabelMap> segs;
  auto dev = open_output(c.output / "deviation.csv");
  dev << "sequence_id,clips,precision_pixels,recall_pixels,pixels\n";
  for (const auto& [si, ends] : by_sequence) {
    const Sequence& seq = d.sequences[si];
    std::vector<Tensor> preds, gts;
    for (std::size_t e : ends) {
      preds.push_back(predict_native(seq, e, model->params));
      gts.push_back(seq.maps[e]);
      if (have_segmentation) segs.push_back(seq.segmentation[e]);
    }
    const Tensor mean_pred = image::max_normalized(analysis::sequence_mean_and_mode(preds).mean);
    const Tensor mean_gt = image::max_normalized(analysis::sequence_mean_and_mode(gts).mean);
    const auto overlay = analysis::deviation_overlay(mean_pred, mean_gt);
    analysis::write_overlay_ppm(images / ("overlay_" + seq.id + ".ppm"), mean_gt, overlay);
    analysis::write_pgm(images / ("mean_pred_" + seq.id + ".pgm"), mean_pred);
    dev << seq.id << ',' << ends.size() << ',' << overlay.precision.size() << ',' << overlay.recall.size() << ','
        << mean_gt.numel() << '\n';
    pred_maps.insert(pred_maps.end(), preds.begin(), preds.end());
    gt_maps.insert(gt_maps.end(), gts.begin(), gts.end());
  }

  if (have_segmentation) {
    const auto gt_sweep = analysis::threshold_sweep(gt_maps, segs, c.n_thresholds);
    const auto pred_sweep = analysis::threshold_sweep(pred_maps, segs, c.n_thresholds);
    auto f = open_output(c.output / "threshold_sweep_prediction.csv");
    analysis::write_sweep_csv(f, gt_sweep, "gt");
    analysis::write_sweep_csv(f, pred_sweep, "prediction");
    auto r = open_output(c.output / "rank_agreement.csv");
    const auto gt_mean = gt_sweep.mean_proportions(), pred_mean = pred_sweep.mean_proportions();
    r << "category,gt_mean_proportion,prediction_mean_proportion\n";
    for (std::size_t k = 0; k < kCategoryCount; ++k) {
      r << category_name(k) << ',' << fmt(gt_mean[k]) << ',' << fmt(pred_mean[k]) << '\n';
    }
    const auto tau = analysis::category_rank_agreement(gt_sweep, pred_sweep);
    r << "kendall_tau," << (tau ? fmt(*tau) : "undefined") << ",\n";
    out << "category rank agreement (Kendall tau-b): " << (tau ? fmt(*tau) : "undefined") << '\n';
  }
}

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> items;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Driver attention prediction: dataset synthesis, training, evaluation and analysis", "drivegaze"};
  app.config_formatter(std::make_shared<CLI::ConfigINI>());
  app.set_config("--config", "", "flat key=value file; flags override its values");
  app.allow_config_extras(CLI::config_extras_mode::error);

  RunConfig c;
  std::string command;
  std::string test_sequences;
  std::uint64_t seed = 0;
  app.add_option("command", command, "synth | train | eval | analyze")
      ->required()
      ->check(CLI::IsMember({"synth", "train", "eval", "analyze"}));
  app.add_option("--dataset", c.dataset, "dataset root (output root for synth)");
  app.add_option("--checkpoint", c.checkpoint, "checkpoint to write (train) or read (eval, analyze)");
  app.add_option("--output", c.output, "output directory")->capture_default_str();
  app.add_option("--resume", c.resume, "checkpoint to resume training from");
  app.add_option("--arch", c.arch, "coarse | coarse_fine")->capture_default_str();
  app.add_flag("--tiny", c.tiny, "channels / 8, input 64, R 128");
  app.add_option("--crop_policy", c.crop_policy, "mild | aggressive (default by architecture)");
  app.add_option("--refine_resolution", c.refine_resolution, "R; input size times a power of two");
  auto* seed_opt = app.add_option("--seed", seed, "mandatory seed")->required();
  app.add_option("--steps", c.steps)->capture_default_str();
  app.add_option("--batch_size", c.batch_size)->capture_default_str();
  app.add_option("--learning_rate", c.learning_rate)->capture_default_str();
  app.add_option("--log_interval", c.log_interval)->capture_default_str();
  app.add_option("--validation_stride", c.validation_stride, "0 disables validation CC")->capture_default_str();
  app.add_option("--validation_frames", c.validation_frames)->capture_default_str();
  app.add_option("--test_sequences", test_sequences, "comma-separated ids (default: last third)");
  app.add_option("--sequences", c.sequences)->capture_default_str();
  app.add_option("--frames", c.frames)->capture_default_str();
  app.add_option("--height", c.height)->capture_default_str();
  app.add_option("--width", c.width)->capture_default_str();
  app.add_option("--event_fraction", c.event_fraction)->capture_default_str();
  app.add_option("--predictor", c.predictor, "model | gaussian | mean_gt");
  app.add_option("--split", c.split, "train | validation | test")->capture_default_str();
  app.add_option("--eval_stride", c.eval_stride, "evaluate every n-th clip")->capture_default_str();
  app.add_option("--sigma_fraction", c.sigma_fraction)->capture_default_str();
  app.add_option("--n_thresholds", c.n_thresholds)->capture_default_str();
  app.add_option("--window", c.window, "hard-subsequence window length")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n' << "run with --help for usage\n";
    return 2;
  }
  if (seed_opt->count() > 0) c.seed = seed;
  c.test_sequences = split_list(test_sequences);

  try {
    if (command == "synth") {
      cmd_synth(c, out, err);
    } else if (command == "train") {
      cmd_train(c, out, err);
    } else if (command == "eval") {
      cmd_eval(c, out, err);
    } else {
      cmd_analyze(c, out, err);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace drivegaze::cli
