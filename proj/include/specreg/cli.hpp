#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "specreg/checkpoint.hpp"
#include "specreg/cube.hpp"
#include "specreg/error.hpp"
#include "specreg/io.hpp"
#include "specreg/masking.hpp"
#include "specreg/pretrain.hpp"
#include "specreg/solver.hpp"

#ifndef SPECREG_VERSION
#define SPECREG_VERSION "0.0.0"
#endif

namespace specreg::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

inline std::string version_string() {
  return std::string("specreg ") + SPECREG_VERSION + " (S3RC v" + std::to_string(kCubeVersion) +
         ", S3RW v" + std::to_string(kWeightsVersion) + ")";
}

inline int exit_code(const Error& e) {
  if (e.kind() == ErrorKind::Usage) return kExitUsage;
  return e.is_numerical() ? kExitNumerical : kExitData;
}

// Cube files of a dataset directory, sorted by file name.
inline std::vector<fs::path> dataset_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorKind::Io, "data directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".s3rc") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) fail(ErrorKind::Validation, "no .s3rc cubes in " + dir.string());
  return files;
}

inline constexpr const char* kLabelsFile = "labels.csv";

// labels.csv rows: file,label,split with split in {train, test}.
inline std::vector<LabeledCube> read_labeled_dataset(const fs::path& dir) {
  const fs::path labels = dir / kLabelsFile;
  std::ifstream in(labels);
  if (!in) fail(ErrorKind::Io, "cannot open " + labels.string());
  std::vector<LabeledCube> data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    std::istringstream row(line);
    std::string file, label, split;
    if (!std::getline(row, file, ',') || !std::getline(row, label, ',') || !std::getline(row, split)) {
      fail(ErrorKind::Validation, labels.string() + ":" + std::to_string(line_no) + ": expected file,label,split");
    }
    Split s;
    if (split == "train") {
      s = Split::Train;
    } else if (split == "test") {
      s = Split::Test;
    } else {
      fail(ErrorKind::Validation, labels.string() + ":" + std::to_string(line_no) + ": split must be train or test");
    }
    std::size_t k = 0;
    try {
      std::size_t used = 0;
      k = std::stoul(label, &used);
      if (used != label.size()) throw std::invalid_argument(label);
    } catch (const std::exception&) {
      fail(ErrorKind::Validation, labels.string() + ":" + std::to_string(line_no) + ": bad label '" + label + "'");
    }
    data.push_back(LabeledCube{read_cube(dir / file), k, s});
  }
  if (data.empty()) fail(ErrorKind::Validation, labels.string() + " lists no cubes");
  return data;
}

inline json coefficients_json(const CoefficientVector& c) {
  return json{{"target_band", c.target_band}, {"coefficients", c.values}};
}

struct Globals {
  std::uint64_t seed = 0;
  bool quiet = false;
  bool json = false;
};

inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-supervised spectral regression for hyperspectral cubes", "specreg"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random stream");
  app.add_flag("--quiet", g.quiet, "Suppress progress messages");
  app.add_flag("--json", g.json, "Emit results as JSON instead of CSV");

  auto sub = [&](const char* name, const char* help) {
    auto* s = app.add_subcommand(name, help);
    s->fallthrough();
    return s;
  };

  // gen
  SyntheticSpec gen_spec;
  std::optional<double> gen_wl_min, gen_wl_max;
  fs::path gen_out;
  auto* gen = sub("gen", "Write a synthetic low-rank cube");
  gen->add_option("--height", gen_spec.height)->required()->check(CLI::PositiveNumber);
  gen->add_option("--width", gen_spec.width)->required()->check(CLI::PositiveNumber);
  gen->add_option("--bands", gen_spec.bands)->required()->check(CLI::PositiveNumber);
  gen->add_option("--rank", gen_spec.rank)->required()->check(CLI::PositiveNumber);
  gen->add_option("--noise", gen_spec.noise_sigma, "Gaussian noise sigma")->default_val(0.0);
  gen->add_option("--smoothness", gen_spec.spectral_smoothness, "Signature width in bands")
      ->default_val(gen_spec.spectral_smoothness);
  gen->add_option("--wl-min", gen_wl_min, "First wavelength (nm)");
  gen->add_option("--wl-max", gen_wl_max, "Last wavelength (nm)");
  gen->add_option("--out", gen_out)->required();

  // gen-labeled
  ClassDatasetSpec lab_spec;
  fs::path lab_out;
  auto* gen_labeled = sub("gen-labeled", "Write a labelled synthetic classification dataset");
  gen_labeled->add_option("--out", lab_out, "Output directory")->required();
  gen_labeled->add_option("--classes", lab_spec.classes)->default_val(lab_spec.classes)->check(CLI::PositiveNumber);
  gen_labeled->add_option("--train", lab_spec.train_per_class, "Training cubes per class")->default_val(lab_spec.train_per_class);
  gen_labeled->add_option("--test", lab_spec.test_per_class, "Test cubes per class")->default_val(lab_spec.test_per_class);
  gen_labeled->add_option("--height", lab_spec.height)->default_val(lab_spec.height)->check(CLI::PositiveNumber);
  gen_labeled->add_option("--width", lab_spec.width)->default_val(lab_spec.width)->check(CLI::PositiveNumber);
  gen_labeled->add_option("--bands", lab_spec.bands)->default_val(lab_spec.bands)->check(CLI::PositiveNumber);
  gen_labeled->add_option("--rank", lab_spec.rank)->default_val(lab_spec.rank)->check(CLI::PositiveNumber);
  gen_labeled->add_option("--noise", lab_spec.noise_sigma)->default_val(lab_spec.noise_sigma);
  gen_labeled->add_option("--smoothness", lab_spec.spectral_smoothness)->default_val(lab_spec.spectral_smoothness);
  gen_labeled->add_option("--shift", lab_spec.class_shift, "Per-class signature shift in bands (default: independent)");

  // solve
  fs::path solve_cube;
  std::optional<std::size_t> solve_band;
  bool solve_all = false;
  std::optional<double> solve_ridge;
  bool solve_gd = false;
  std::optional<double> solve_alpha;
  std::size_t solve_steps = 1000;
  auto* solve = sub("solve", "Regress one band on the others");
  solve->add_option("--cube", solve_cube)->required();
  auto* band_opt = solve->add_option("--band", solve_band, "Target band");
  auto* all_opt = solve->add_flag("--all-bands", solve_all, "Oracle table for every band (also cached as <cube>.beta.csv)");
  band_opt->excludes(all_opt);
  solve->add_option("--ridge", solve_ridge, "Ridge lambda (default 0, or 1e-8 with --all-bands)");
  auto* gd_opt = solve->add_flag("--gd", solve_gd, "Use gradient descent");
  gd_opt->excludes(all_opt);
  solve->add_option("--alpha", solve_alpha, "Gradient descent step size")->needs(gd_opt);
  solve->add_option("--steps", solve_steps, "Gradient descent steps")->needs(gd_opt);

  // inspect-mask
  std::size_t mask_h = 0, mask_w = 0, mask_planes = 0;
  MaskSpec mask_spec;
  std::optional<fs::path> mask_dump;
  auto* inspect = sub("inspect-mask", "Sample a patch mask and report per-plane fractions");
  inspect->add_option("--height", mask_h)->required()->check(CLI::PositiveNumber);
  inspect->add_option("--width", mask_w)->required()->check(CLI::PositiveNumber);
  inspect->add_option("--planes", mask_planes)->required()->check(CLI::PositiveNumber);
  inspect->add_option("--ratio", mask_spec.target_ratio)->default_val(kDefaultMaskRatio);
  inspect->add_option("--patch", mask_spec.patch_size, "Patch edge (0: min(H, W) / 8)")->default_val(0);
  inspect->add_option("--dump", mask_dump, "Write the mask container");

  // pretrain
  TrainConfig train_cfg;
  train_cfg.record_wall_time = false;
  std::string task_name;
  fs::path pre_data, pre_out;
  std::optional<fs::path> pre_log;
  auto* pretrain = sub("pretrain", "Train the encoder on a pretext task");
  pretrain->add_option("--task", task_name)->required()->check(CLI::IsMember({"cr", "br"}));
  pretrain->add_option("--data", pre_data, "Directory of .s3rc cubes")->required();
  pretrain->add_option("--epochs", train_cfg.epochs_max)->default_val(train_cfg.epochs_max);
  pretrain->add_option("--lr", train_cfg.lr0)->default_val(train_cfg.lr0);
  pretrain->add_option("--gamma", train_cfg.gamma)->default_val(train_cfg.gamma);
  pretrain->add_option("--batch", train_cfg.batch_size)->default_val(train_cfg.batch_size);
  pretrain->add_option("--ratio", train_cfg.mask.target_ratio)->default_val(kDefaultMaskRatio);
  pretrain->add_option("--patch", train_cfg.mask.patch_size, "Patch edge (0: min(H, W) / 8)")->default_val(0);
  pretrain->add_option("--patience", train_cfg.early_stop_patience)->default_val(train_cfg.early_stop_patience);
  pretrain->add_option("--weight-decay", train_cfg.weight_decay)->default_val(train_cfg.weight_decay);
  pretrain->add_option("--channels", train_cfg.stem_channels)->default_val(train_cfg.stem_channels);
  pretrain->add_flag("--masked-br", train_cfg.br_masked_reconstruction,
                     "Band regression reconstructs from the masked bands");
  pretrain->add_flag("--log-timing", train_cfg.record_wall_time, "Record wall-clock seconds in the log");
  pretrain->add_option("--out", pre_out, "Checkpoint path")->required();
  pretrain->add_option("--log", pre_log, "Run log CSV path");

  // probe
  fs::path probe_ckpt, probe_data;
  ProbeOptions probe_opts;
  auto* probe = sub("probe", "Linear-probe a checkpoint on a labelled dataset");
  probe->add_option("--ckpt", probe_ckpt)->required();
  probe->add_option("--data", probe_data, "Directory with labels.csv and its cubes")->required();
  probe->add_option("--iterations", probe_opts.iterations)->default_val(probe_opts.iterations);

  // beta-stats
  fs::path stats_ckpt, stats_data, stats_out;
  auto* beta_stats = sub("beta-stats", "Export predicted coefficients for every cube and band");
  beta_stats->add_option("--ckpt", stats_ckpt)->required();
  beta_stats->add_option("--data", stats_data, "Directory of .s3rc cubes")->required();
  beta_stats->add_option("--out", stats_out)->required();

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  auto note = [&](const std::string& msg) {
    if (!g.quiet) err << msg << '\n';
  };

  try {
    if (gen->parsed()) {
      gen_spec.seed = g.seed;
      if (gen_wl_min.has_value() != gen_wl_max.has_value()) {
        fail(ErrorKind::Usage, "--wl-min and --wl-max must be given together");
      }
      gen_spec.wavelength_min_nm = gen_wl_min;
      gen_spec.wavelength_max_nm = gen_wl_max;
      gen_spec.validate();
      auto cube = generate_synthetic(gen_spec);
      write_cube(cube, gen_out);
      if (g.json) {
        out << json{{"out", gen_out.string()}, {"height", cube.height()}, {"width", cube.width()},
                    {"bands", cube.bands()}}.dump()
            << '\n';
      }
      note("wrote " + gen_out.string());
    } else if (gen_labeled->parsed()) {
      lab_spec.seed = g.seed;
      lab_spec.validate();
      auto data = make_class_dataset(lab_spec);
      fs::create_directories(lab_out);
      std::ostringstream labels;
      labels << "file,label,split\n";
      std::vector<std::size_t> index(lab_spec.classes, 0);
      for (const auto& d : data) {
        const std::string name = "class" + std::to_string(d.label) + "_" + std::to_string(index[d.label]++) + ".s3rc";
        write_cube(d.cube, lab_out / name);
        labels << name << ',' << d.label << ',' << (d.split == Split::Train ? "train" : "test") << '\n';
      }
      io::write_text_atomic(lab_out / kLabelsFile, labels.str());
      note("wrote " + std::to_string(data.size()) + " cubes to " + lab_out.string());
    } else if (solve->parsed()) {
      if (!solve_band && !solve_all) fail(ErrorKind::Usage, "solve needs --band B or --all-bands");
      const double ridge = solve_ridge.value_or(solve_all ? kOracleRidge : 0.0);
      check_ridge(ridge);
      if (solve_alpha) require(std::isfinite(*solve_alpha) && *solve_alpha > 0.0, "--alpha must be > 0");
      const auto cube = read_cube(solve_cube);
      if (solve_all) {
        const auto table = oracle_coefficients(cube, ridge, true);
        write_oracle_table(table, oracle_table_path(solve_cube));
        if (g.json) {
          json rows = json::array();
          for (const auto& row : table) rows.push_back(coefficients_json(row));
          out << json{{"ridge_lambda", ridge}, {"rows", rows}}.dump() << '\n';
        } else {
          out << format_oracle_table(table);
        }
        note("cached " + oracle_table_path(solve_cube).string());
      } else {
        cube.check_band(*solve_band);
        RegressionFit fit;
        if (solve_gd) {
          GradientDescentOptions opts;
          opts.alpha = solve_alpha;
          opts.steps = solve_steps;
          opts.ridge_lambda = ridge;
          fit = fit_gradient_descent(cube, *solve_band, opts);
        } else {
          fit = fit_closed_form(cube, *solve_band, ridge);
        }
        if (g.json) {
          auto j = coefficients_json(fit.coefficients);
          j["method"] = to_string(fit.method);
          j["iterations"] = fit.iterations;
          j["ridge_lambda"] = fit.ridge_lambda;
          j["residual"] = fit.residual_fro;
          out << j.dump() << '\n';
        } else {
          out << "target_band,residual";
          for (std::size_t i = 0; i < fit.coefficients.size(); ++i) out << ",beta_" << i;
          out << '\n' << fit.coefficients.target_band << ',' << io::format_double(fit.residual_fro);
          for (double v : fit.coefficients.values) out << ',' << io::format_double(v);
          out << '\n';
        }
      }
    } else if (inspect->parsed()) {
      mask_spec.seed = g.seed;
      mask_spec.validate(mask_h, mask_w);
      const auto mask = sample_mask(mask_spec, mask_h, mask_w, mask_planes);
      const auto fractions = measured_ratio(mask);
      if (mask_dump) write_mask(mask, *mask_dump);
      if (g.json) {
        out << json{{"patch", mask_spec.resolved_patch(mask_h, mask_w)}, {"fractions", fractions}}.dump() << '\n';
      } else {
        out << "plane,masked_fraction\n";
        for (std::size_t p = 0; p < fractions.size(); ++p) {
          out << p << ',' << io::format_double(fractions[p]) << '\n';
        }
      }
    } else if (pretrain->parsed()) {
      train_cfg.task = task_name == "cr" ? PretextTask::CoefficientRegression : PretextTask::BandRegression;
      train_cfg.seed = g.seed;
      train_cfg.validate();
      train_cfg.dataset = dataset_files(pre_data);
      const auto set = load_pretrain_set(train_cfg.dataset, train_cfg.task);
      auto result = train(train_cfg, set, [&](const EpochRecord& r) {
        note("epoch " + std::to_string(r.epoch) + " lr " + io::format_double(r.lr) + " loss " +
             io::format_double(r.loss));
      });
      write_checkpoint(result.encoder, pre_out);
      if (pre_log) io::write_text_atomic(*pre_log, format_run_log(result.log));
      const auto& last = result.log.epochs.back();
      const char* status = result.log.status == RunStatus::Completed ? "completed" : "early_stopped";
      const std::string hash = checkpoint_hash(result.encoder);
      if (g.json) {
        out << json{{"status", status},
                    {"epochs", result.log.epochs.size()},
                    {"best_epoch", result.log.best_epoch},
                    {"final_loss", last.loss},
                    {"checkpoint_hash", hash}}
                   .dump()
            << '\n';
      } else {
        out << "status,epochs,best_epoch,final_loss,checkpoint_hash\n"
            << status << ',' << result.log.epochs.size() << ',' << result.log.best_epoch << ','
            << io::format_double(last.loss) << ',' << hash << '\n';
      }
    } else if (probe->parsed()) {
      require(probe_opts.iterations >= 1, "--iterations must be >= 1");
      const auto encoder = read_checkpoint(probe_ckpt);
      const auto data = read_labeled_dataset(probe_data);
      const auto r = linear_probe(encoder, data, g.seed, probe_opts);
      if (g.json) {
        out << json{{"seed", r.seed},
                    {"encoder_hash", r.encoder_hash},
                    {"accuracy", r.accuracy},
                    {"test_counts", r.test_counts},
                    {"correct_counts", r.correct_counts}}
                   .dump()
            << '\n';
      } else {
        out << "seed,encoder_hash,accuracy\n"
            << r.seed << ',' << r.encoder_hash << ',' << io::format_double(r.accuracy) << '\n';
      }
    } else if (beta_stats->parsed()) {
      const auto encoder = read_checkpoint(stats_ckpt);
      std::vector<HsiCube> cubes;
      for (const auto& p : dataset_files(stats_data)) cubes.push_back(read_cube(p));
      const auto rows = export_beta_stats(encoder, cubes);
      io::write_text_atomic(stats_out, format_beta_stats(rows));
      const auto loc = beta_locality(rows);
      note("wrote " + std::to_string(rows.size()) + " rows to " + stats_out.string());
      if (g.json) {
        out << json{{"rows", rows.size()}, {"mean_abs_adjacent", loc.near_mean}, {"mean_abs_distant", loc.far_mean}}.dump()
            << '\n';
      }
    }
  } catch (const Error& e) {
    err << "specreg: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    err << "specreg: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(std::move(args), out, err);
}

}  // namespace specreg::cli
