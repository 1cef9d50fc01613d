// SPDX-License-Identifier: Apache-2.0
//
// diffseg command line: generate | train | eval | plot | sweep.
// All state flows through flags and the config file; outputs are
// byte-reproducible given identical inputs and seeds.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "diffseg/barcode.hpp"
#include "diffseg/config.hpp"
#include "diffseg/errors.hpp"
#include "diffseg/pipeline.hpp"

namespace fs = std::filesystem;
using namespace diffseg;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "'");
  os << text;
  os.flush();
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

void require_outputs(const std::vector<fs::path>& paths) {
  for (const fs::path& p : paths)
    if (!fs::exists(p)) throw IoError("declared output missing: '" + p.string() + "'");
}

std::vector<std::string> read_label_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open label file '" + path.string() + "'");
  std::vector<std::string> names;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) names.push_back(line);
  }
  if (names.empty()) throw ValidationError("label file '" + path.string() + "' is empty");
  return names;
}

int cmd_generate(const std::string& config_path, const std::string& out_dir) {
  const ExperimentConfig cfg = load_experiment_config(config_path);
  const SyntheticDataset ds = generate(cfg.grammar, cfg.data);
  write_dataset(ds, out_dir);
  write_text(fs::path(out_dir) / "config_resolved.ini", cfg.resolved_text());
  require_outputs({fs::path(out_dir) / "meta.txt", fs::path(out_dir) / "mapping.txt",
                   fs::path(out_dir) / "splits" / "train.bundle",
                   fs::path(out_dir) / "splits" / "test.bundle"});
  std::cout << "generated " << ds.videos.size() << " videos (" << ds.train_ids.size()
            << " train / " << ds.test_ids.size() << " test) under " << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir, const std::string& resume_from) {
  const ExperimentConfig cfg = load_experiment_config(config_path);
  const SyntheticDataset ds = read_dataset(data_dir);
  const TrainResult result = train(ds, cfg, out_dir, resume_from);
  require_outputs({fs::path(result.checkpoint_path), fs::path(out_dir) / "train_log.txt",
                   fs::path(out_dir) / "config_resolved.ini"});
  std::cout << "trained " << result.iterations << " iterations, final loss " << result.final_loss
            << ", checkpoint " << result.checkpoint_path << "\n";
  return 0;
}

struct EvalFlags {
  std::string split = "test";
  int steps = -1;  // -1: use config
  std::string cond_mask = "N";
  bool oracle = false;
  bool dump_trajectory = false;
  int threads = 1;
};

int cmd_eval(const std::string& config_path, const std::string& checkpoint_path,
             const std::string& data_dir, const std::string& out_dir, const EvalFlags& flags) {
  const ExperimentConfig cfg = load_experiment_config(config_path);
  const SyntheticDataset ds = read_dataset(data_dir);
  const Model model = load_checkpoint(checkpoint_path);
  const NoiseSchedule sch = cfg.make_schedule();

  EvalSettings settings;
  settings.inference_steps = flags.steps > 0 ? flags.steps : cfg.inference_steps;
  settings.seed = cfg.eval_seed;
  settings.cond_mask = parse_mask_kind(flags.cond_mask.size() == 1 ? flags.cond_mask[0] : '?');
  settings.boundary_std = cfg.boundary_std;
  settings.oracle_decoder = flags.oracle;
  settings.threads = flags.threads;
  settings.keep_trajectory = flags.dump_trajectory;
  settings.metric_opts = cfg.eval_options();

  const std::vector<std::string>& split = flags.split == "train" ? ds.train_ids : ds.test_ids;
  if (flags.split != "train" && flags.split != "test")
    throw ConfigError("eval: --split must be 'train' or 'test'");

  const EvalResult result = evaluate(ds, split, model, sch, settings);

  fs::create_directories(fs::path(out_dir) / "predictions");
  write_text(fs::path(out_dir) / "config_resolved.ini", cfg.resolved_text());
  for (std::size_t i = 0; i < result.video_ids.size(); ++i) {
    std::ostringstream body;
    for (int c : result.predictions[i]) body << ds.class_names[static_cast<std::size_t>(c)] << "\n";
    write_text(fs::path(out_dir) / "predictions" / (result.video_ids[i] + ".txt"), body.str());
  }
  write_text(fs::path(out_dir) / "metrics.csv",
             metric_csv_header() + "\n" + metric_csv_row(flags.split, result.report) + "\n");

  if (flags.dump_trajectory) {
    for (std::size_t i = 0; i < result.video_ids.size(); ++i) {
      const fs::path dir = fs::path(out_dir) / "trajectory" / result.video_ids[i];
      fs::create_directories(dir);
      const InferenceResult& inf = result.trajectories[i];
      for (std::size_t k = 0; k < inf.steps.size(); ++k) {
        char name[64];
        std::snprintf(name, sizeof(name), "step%02zu_s%04d.txt", k, inf.steps[k]);
        std::ostringstream body;
        for (int c : argmax_rows(inf.step_probs[k]))
          body << ds.class_names[static_cast<std::size_t>(c)] << "\n";
        write_text(dir / name, body.str());
      }
    }
  }

  require_outputs({fs::path(out_dir) / "metrics.csv"});
  std::cout << metric_csv_header() << "\n" << metric_csv_row(flags.split, result.report) << "\n";
  return 0;
}

int cmd_plot(const std::vector<std::string>& label_files, const std::string& mapping_file,
             const std::string& out_svg) {
  // Class indices come from the mapping file when given, else from first
  // appearance across the rows (deterministic in the input order).
  std::map<std::string, int> name_to_class;
  if (!mapping_file.empty()) {
    std::ifstream is(mapping_file, std::ios::binary);
    if (!is) throw IoError("cannot open mapping file '" + mapping_file + "'");
    std::string line;
    while (std::getline(is, line)) {
      std::istringstream ls(line);
      int idx;
      std::string name;
      if (ls >> idx >> name) {
        if (!name_to_class.emplace(name, idx).second)
          throw ValidationError("mapping file: duplicate class name '" + name + "'");
      }
    }
  }

  std::vector<BarcodeRow> rows;
  for (const std::string& file : label_files) {
    BarcodeRow row;
    row.title = fs::path(file).stem().string();
    for (const std::string& name : read_label_file(file)) {
      auto it = name_to_class.find(name);
      if (it == name_to_class.end()) {
        if (!mapping_file.empty())
          throw ValidationError("label '" + name + "' not in mapping file");
        it = name_to_class.emplace(name, static_cast<int>(name_to_class.size())).first;
      }
      row.labels.push_back(it->second);
    }
    rows.push_back(std::move(row));
  }
  write_barcode_svg(out_svg, rows);
  require_outputs({fs::path(out_svg)});
  std::cout << "wrote " << out_svg << " (" << rows.size() << " rows)\n";
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir, const std::vector<std::string>& mask_sets,
              const std::vector<int>& step_counts, const std::vector<std::string>& infer_masks,
              int threads) {
  const ExperimentConfig base = load_experiment_config(config_path);
  const SyntheticDataset ds = read_dataset(data_dir);

  std::ostringstream summary;
  summary << "variant," << metric_csv_header() << "\n";
  for (const std::string& set : mask_sets) {
    ExperimentConfig cfg = base;
    cfg.mask_kinds = parse_mask_kinds(set);
    const std::string train_dir = (fs::path(out_dir) / ("train_" + set)).string();
    const TrainResult trained = train(ds, cfg, train_dir);
    const Model model = load_checkpoint(trained.checkpoint_path);
    const NoiseSchedule sch = cfg.make_schedule();

    for (int steps : step_counts) {
      for (const std::string& mask : infer_masks) {
        EvalSettings settings;
        settings.inference_steps = steps;
        settings.seed = cfg.eval_seed;
        settings.cond_mask = parse_mask_kind(mask.size() == 1 ? mask[0] : '?');
        settings.boundary_std = cfg.boundary_std;
        settings.threads = threads;
        settings.metric_opts = cfg.eval_options();
        const EvalResult result = evaluate(ds, ds.test_ids, model, sch, settings);

        const std::string variant = set + "_s" + std::to_string(steps) + "_m" + mask;
        const fs::path eval_dir = fs::path(out_dir) / ("eval_" + variant);
        fs::create_directories(eval_dir);
        write_text(eval_dir / "metrics.csv",
                   metric_csv_header() + "\n" + metric_csv_row("test", result.report) + "\n");
        summary << variant << "," << metric_csv_row("test", result.report) << "\n";
        std::cout << variant << ": " << metric_csv_row("test", result.report) << "\n";
      }
    }
  }
  write_text(fs::path(out_dir) / "sweep_summary.csv", summary.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diffusion-based temporal action segmentation on synthetic benchmarks"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_dir, checkpoint_path, resume_from, mapping_file, out_svg;
  std::vector<std::string> label_files;
  EvalFlags eval_flags;
  std::vector<std::string> mask_sets{"NPBR"};
  std::vector<int> step_counts{25};
  std::vector<std::string> infer_masks{"N"};
  int sweep_threads = 1;

  CLI::App* gen = app.add_subcommand("generate", "synthesize a dataset onto disk");
  gen->add_option("--config", config_path, "experiment config file")
      ->required()
      ->check(CLI::ExistingFile);
  gen->add_option("--out", out_dir, "output dataset directory")->required();

  CLI::App* tr = app.add_subcommand("train", "train a model on a generated dataset");
  tr->add_option("--config", config_path, "experiment config file")
      ->required()
      ->check(CLI::ExistingFile);
  tr->add_option("--data", data_dir, "dataset directory")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--out", out_dir, "output directory for checkpoints and logs")->required();
  tr->add_option("--resume", resume_from, "checkpoint to resume from")->check(CLI::ExistingFile);

  CLI::App* ev = app.add_subcommand("eval", "run inference and report metrics");
  ev->add_option("--config", config_path, "experiment config file")
      ->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--checkpoint", checkpoint_path, "model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--data", data_dir, "dataset directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--out", out_dir, "output directory")->required();
  ev->add_option("--split", eval_flags.split, "split to evaluate (train|test)");
  ev->add_option("--steps", eval_flags.steps, "override the number of denoising steps");
  ev->add_option("--cond-mask", eval_flags.cond_mask,
                 "condition mask applied at inference (N|P|B|R)");
  ev->add_flag("--oracle", eval_flags.oracle, "replace the decoder with ground-truth output");
  ev->add_flag("--dump-trajectory", eval_flags.dump_trajectory,
               "write per-step label dumps for each video");
  ev->add_option("--threads", eval_flags.threads, "videos evaluated in parallel");

  CLI::App* pl = app.add_subcommand("plot", "render label sequences as an SVG barcode");
  pl->add_option("files", label_files, "label files, one bar each, top to bottom")
      ->required()
      ->check(CLI::ExistingFile);
  pl->add_option("--mapping", mapping_file, "class mapping file (index name per line)")
      ->check(CLI::ExistingFile);
  pl->add_option("--out", out_svg, "output SVG path")->required();

  CLI::App* sw = app.add_subcommand("sweep", "train/eval a grid of ablation variants");
  sw->add_option("--config", config_path, "experiment config file")
      ->required()
      ->check(CLI::ExistingFile);
  sw->add_option("--data", data_dir, "dataset directory")->required()->check(CLI::ExistingDirectory);
  sw->add_option("--out", out_dir, "output directory, one subdirectory per variant")->required();
  sw->add_option("--mask-sets", mask_sets, "training mask subsets, e.g. N NPBR");
  sw->add_option("--steps", step_counts, "inference step counts, e.g. 1 8 25");
  sw->add_option("--infer-masks", infer_masks, "condition masks at inference, e.g. N P");
  sw->add_option("--threads", sweep_threads, "videos evaluated in parallel");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate(config_path, out_dir);
    if (tr->parsed()) return cmd_train(config_path, data_dir, out_dir, resume_from);
    if (ev->parsed()) return cmd_eval(config_path, checkpoint_path, data_dir, out_dir, eval_flags);
    if (pl->parsed()) return cmd_plot(label_files, mapping_file, out_svg);
    if (sw->parsed())
      return cmd_sweep(config_path, data_dir, out_dir, mask_sets, step_counts, infer_masks,
                       sweep_threads);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
