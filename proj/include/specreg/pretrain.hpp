#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "specreg/checkpoint.hpp"
#include "specreg/cube.hpp"
#include "specreg/error.hpp"
#include "specreg/masking.hpp"
#include "specreg/nnet.hpp"
#include "specreg/rng.hpp"
#include "specreg/solver.hpp"

namespace specreg {

enum class PretextTask { CoefficientRegression, BandRegression };

inline const char* to_string(PretextTask t) {
  return t == PretextTask::CoefficientRegression ? "cr" : "br";
}

// ---------------------------------------------------------------------------
// Pretext sampling

struct PretextSample {
  std::size_t band = 0;
  BandStack masked_input;
  // Unmasked remaining bands and the held-out band (band regression target).
  BandStack remaining;
  BandImage target;
  // Oracle coefficients for the held-out band (coefficient regression only).
  CoefficientVector beta_tilde;
};

// Draws the held-out band uniformly, masks the remaining bands with a mask
// seeded from the same stream, and attaches the target for `task`.
inline PretextSample sample_pretext(const HsiCube& cube, const OracleTable* table, Rng& rng,
                                    PretextTask task, const MaskSpec& mask_spec = {}) {
  if (task == PretextTask::CoefficientRegression) {
    if (table == nullptr) {
      fail(ErrorKind::Validation,
           "coefficient regression needs the oracle coefficient table; run "
           "`specreg solve --cube <cube> --all-bands` first");
    }
    require(table->size() == cube.bands(), "oracle table band count does not match the cube");
  }
  const std::size_t b = rng.uniform_index(cube.bands());
  MaskSpec spec = mask_spec;
  spec.seed = rng.next_u64();
  auto remaining = remaining_bands(cube, b);
  auto mask = sample_mask(spec, cube.height(), cube.width(), remaining.bands());
  auto masked = apply_mask(remaining, mask, spec.fill_value);
  CoefficientVector beta;
  if (task == PretextTask::CoefficientRegression) beta = (*table)[b];
  return PretextSample{b, std::move(masked), std::move(remaining), extract_band(cube, b),
                       std::move(beta)};
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  PretextTask task = PretextTask::CoefficientRegression;
  std::vector<std::filesystem::path> dataset;
  std::size_t epochs_max = 200;
  double lr0 = nn::kDefaultLr;
  double gamma = nn::kDefaultGamma;
  std::size_t batch_size = 8;
  // The mask seed is ignored; every sample derives its own.
  MaskSpec mask;
  std::size_t early_stop_patience = 20;
  double min_rel_improvement = 1e-4;
  std::uint64_t seed = 0;
  double weight_decay = 0.0;
  std::size_t stem_channels = 16;
  std::size_t num_stages = 3;
  std::size_t head_hidden = 128;
  // Band regression reconstructs from the masked rather than clean bands.
  bool br_masked_reconstruction = false;
  // When false, each cube keeps the same (band, mask) draw in every epoch.
  bool resample_each_epoch = true;
  // When false, the seconds column of the run log is written as 0.
  bool record_wall_time = true;

  void validate() const {
    require(epochs_max >= 1, "epochs_max must be >= 1");
    require(batch_size >= 1, "batch_size must be >= 1");
    require(early_stop_patience >= 1, "early_stop_patience must be >= 1");
    require(std::isfinite(lr0) && lr0 >= 0.0, "lr0 must be >= 0");
    require(std::isfinite(gamma) && gamma > 0.0, "gamma must be > 0");
    require(std::isfinite(weight_decay) && weight_decay >= 0.0, "weight_decay must be >= 0");
    require(min_rel_improvement >= 0.0, "min_rel_improvement must be >= 0");
    require(mask.target_ratio > 0.0 && mask.target_ratio < 1.0, "mask ratio must lie in (0, 1)");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double seconds = 0.0;
};

enum class RunStatus { Completed, EarlyStopped };

struct RunLog {
  std::vector<EpochRecord> epochs;
  RunStatus status = RunStatus::Completed;
  // Index of the epoch with the lowest loss (the checkpointed state).
  std::size_t best_epoch = 0;
};

inline std::string format_run_log(const RunLog& log) {
  std::ostringstream out;
  out << "epoch,lr,loss,seconds\n";
  for (const auto& r : log.epochs) {
    out << r.epoch << ',' << io::format_double(r.lr) << ',' << io::format_double(r.loss) << ','
        << io::format_double(r.seconds) << '\n';
  }
  return out.str();
}

struct PretrainSet {
  std::vector<HsiCube> cubes;
  // One table per cube; may be empty for band regression.
  std::vector<OracleTable> tables;

  std::size_t bands() const { return cubes.empty() ? 0 : cubes.front().bands(); }
};

inline PretrainSet with_oracle_tables(std::vector<HsiCube> cubes) {
  PretrainSet set;
  for (const auto& c : cubes) set.tables.push_back(oracle_coefficients(c));
  set.cubes = std::move(cubes);
  return set;
}

// Loads cubes and, for coefficient regression, their cached oracle tables.
inline PretrainSet load_pretrain_set(const std::vector<std::filesystem::path>& paths,
                                     PretextTask task) {
  PretrainSet set;
  for (const auto& p : paths) {
    set.cubes.push_back(read_cube(p));
    if (task == PretextTask::CoefficientRegression) {
      const auto table_path = oracle_table_path(p);
      if (!std::filesystem::exists(table_path)) {
        fail(ErrorKind::Validation, "missing oracle table " + table_path.string() +
                                        "; run `specreg solve --cube " + p.string() +
                                        " --all-bands` first");
      }
      set.tables.push_back(read_oracle_table(table_path, set.cubes.back().bands()));
    }
  }
  return set;
}

struct TrainResult {
  nn::Encoder encoder;
  RunLog log;
};

// Stream tags for derive_seed so that independent uses of the run seed never
// share a stream.
namespace seed_tag {
inline constexpr std::uint64_t init = 1;
inline constexpr std::uint64_t shuffle = 2;
inline constexpr std::uint64_t sample = 3;
}  // namespace seed_tag

inline TrainResult train(const TrainConfig& config, const PretrainSet& data,
                         const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  config.validate();
  require(!data.cubes.empty(), "training dataset is empty");
  const std::size_t bands = data.bands();
  for (const auto& c : data.cubes) {
    if (c.bands() != bands) {
      fail(ErrorKind::Validation, "all training cubes must share one band count (found " +
                                      std::to_string(bands) + " and " +
                                      std::to_string(c.bands()) + ")");
    }
  }
  const bool cr = config.task == PretextTask::CoefficientRegression;
  if (cr && data.tables.size() != data.cubes.size()) {
    fail(ErrorKind::Validation,
         "coefficient regression needs an oracle table per cube; run "
         "`specreg solve --cube <cube> --all-bands` first");
  }

  auto enc = nn::Encoder::initialize(
      nn::pretext_config(bands, config.stem_channels, config.num_stages, config.head_hidden),
      derive_seed(config.seed, {seed_tag::init}));
  nn::AdamWState opt(enc, nn::AdamWOptions{.weight_decay = config.weight_decay});

  TrainResult result{enc, {}};
  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  const std::size_t n = data.cubes.size();
  std::vector<std::size_t> order(n);

  for (std::size_t epoch = 0; epoch < config.epochs_max; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = nn::lr_schedule(epoch, config.lr0, config.gamma);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffler(derive_seed(config.seed, {seed_tag::shuffle, epoch}));
    shuffler.shuffle(std::span(order));

    double total = 0.0;
    for (std::size_t start = 0, batch = 0; start < n; start += config.batch_size, ++batch) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      const double scale = 1.0 / static_cast<double>(stop - start);
      enc.zero_grad();
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t idx = order[k];
        const std::uint64_t draw_epoch = config.resample_each_epoch ? epoch : 0;
        Rng rng(derive_seed(config.seed, {seed_tag::sample, draw_epoch, idx}));
        const auto sample = sample_pretext(data.cubes[idx], cr ? &data.tables[idx] : nullptr, rng,
                                           config.task, config.mask);
        const auto beta_hat = enc.forward(sample.masked_input);
        const auto loss =
            cr ? nn::loss_cr(beta_hat, sample.beta_tilde.values)
               : nn::loss_br(beta_hat,
                             config.br_masked_reconstruction ? sample.masked_input : sample.remaining,
                             sample.target);
        if (!std::isfinite(loss.value)) {
          fail(ErrorKind::NonFinite, "non-finite loss at epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(batch) + " (cube " +
                                         std::to_string(idx) + ")");
        }
        auto grad = loss.grad;
        for (double& g : grad) g *= scale;
        enc.backward(grad);
        total += loss.value;
      }
      nn::adamw_step(enc.parameters(), opt, lr);
    }

    EpochRecord rec{epoch, lr, total / static_cast<double>(n), 0.0};
    if (config.record_wall_time) {
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    result.log.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    const bool improved = !std::isfinite(best) || rec.loss < best - config.min_rel_improvement * std::abs(best);
    if (improved) {
      best = rec.loss;
      stale = 0;
      result.encoder = enc;
      result.log.best_epoch = epoch;
    } else if (++stale >= config.early_stop_patience) {
      result.log.status = RunStatus::EarlyStopped;
      break;
    }
  }
  return result;
}

inline TrainResult train(const TrainConfig& config) {
  return train(config, load_pretrain_set(config.dataset, config.task));
}

// ---------------------------------------------------------------------------
// Coefficient diagnostics

struct BetaRow {
  std::size_t cube = 0;
  std::size_t target_band = 0;
  std::vector<double> values;
};

// Predicted coefficients for every (cube, target band), from the clean
// remaining bands.
inline std::vector<BetaRow> export_beta_stats(const nn::Encoder& encoder,
                                              const std::vector<HsiCube>& cubes) {
  auto enc = encoder;
  std::vector<BetaRow> rows;
  for (std::size_t c = 0; c < cubes.size(); ++c) {
    const auto& cube = cubes[c];
    if (cube.bands() - 1 != enc.config().in_planes || enc.config().out_dim != enc.config().in_planes) {
      fail(ErrorKind::Validation, "checkpoint expects " + std::to_string(enc.config().in_planes + 1) +
                                      "-band cubes, cube " + std::to_string(c) + " has " +
                                      std::to_string(cube.bands()));
    }
    for (std::size_t b = 0; b < cube.bands(); ++b) {
      rows.push_back(BetaRow{c, b, enc.forward(remaining_bands(cube, b))});
    }
  }
  return rows;
}

inline std::string format_beta_stats(const std::vector<BetaRow>& rows) {
  std::ostringstream out;
  const std::size_t n = rows.empty() ? 0 : rows.front().values.size();
  out << "cube,target_band";
  for (std::size_t i = 0; i < n; ++i) out << ",beta_" << i;
  out << '\n';
  for (const auto& r : rows) {
    out << r.cube << ',' << r.target_band;
    for (double v : r.values) out << ',' << io::format_double(v);
    out << '\n';
  }
  return out.str();
}

// Mean |beta| over sources adjacent to the target versus sources at spectral
// distance >= 4.
struct BetaLocality {
  double near_mean = 0.0;
  double far_mean = 0.0;
};

inline BetaLocality beta_locality(const std::vector<BetaRow>& rows) {
  double near = 0.0, far = 0.0;
  std::size_t n_near = 0, n_far = 0;
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.values.size(); ++i) {
      const std::size_t src = source_band(r.target_band, i);
      const std::size_t d = src > r.target_band ? src - r.target_band : r.target_band - src;
      if (d == 1) {
        near += std::abs(r.values[i]);
        ++n_near;
      } else if (d >= 4) {
        far += std::abs(r.values[i]);
        ++n_far;
      }
    }
  }
  return BetaLocality{n_near ? near / static_cast<double>(n_near) : 0.0,
                      n_far ? far / static_cast<double>(n_far) : 0.0};
}

// Fraction of target bands whose two largest-magnitude coefficients both come
// from sources within `radius` bands of the target.
inline double locality_fraction(const OracleTable& table, std::size_t radius = 2) {
  std::size_t hits = 0;
  for (const auto& row : table) {
    std::vector<std::size_t> idx(row.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(row.values[a]) > std::abs(row.values[b]);
    });
    bool ok = idx.size() >= 1;
    for (std::size_t k = 0; k < std::min<std::size_t>(2, idx.size()); ++k) {
      const std::size_t src = source_band(row.target_band, idx[k]);
      const std::size_t d = src > row.target_band ? src - row.target_band : row.target_band - src;
      ok = ok && d <= radius;
    }
    hits += ok ? 1 : 0;
  }
  return table.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(table.size());
}

// ---------------------------------------------------------------------------
// Transfer

// Resamples the stem convolution along its input-plane axis to
// `new_in_planes` by linear interpolation, then shifts each
// (output channel, tap) so its mean over input planes is unchanged. A single
// output plane therefore receives the plane mean. All other parameters are
// copied verbatim.
inline nn::Encoder adapt_first_layer(const nn::Encoder& encoder, std::size_t new_in_planes) {
  require(new_in_planes >= 1, "new_in_planes must be >= 1");
  const auto& old_cfg = encoder.config();
  if (new_in_planes == old_cfg.in_planes) return encoder;

  auto cfg = old_cfg;
  cfg.in_planes = new_in_planes;
  auto out = nn::Encoder::zeros(cfg);
  for (std::size_t k = 0; k < out.parameters().size(); ++k) {
    if (out.parameters()[k].name != "stem.weight") {
      out.parameters()[k].value = encoder.parameters()[k].value;
    }
  }

  const std::size_t n_old = old_cfg.in_planes;
  const std::size_t n_new = new_in_planes;
  const auto& w_old = encoder.parameter("stem.weight").value;
  auto& w_new = out.parameter("stem.weight").value;
  for (std::size_t o = 0; o < cfg.stem_channels; ++o) {
    for (std::size_t tap = 0; tap < 9; ++tap) {
      auto old_at = [&](std::size_t i) { return w_old[(o * n_old + i) * 9 + tap]; };
      double old_mean = 0.0;
      for (std::size_t i = 0; i < n_old; ++i) old_mean += old_at(i);
      old_mean /= static_cast<double>(n_old);

      std::vector<double> resampled(n_new, old_mean);
      if (n_new > 1 && n_old > 1) {
        for (std::size_t j = 0; j < n_new; ++j) {
          const double x = static_cast<double>(j) * static_cast<double>(n_old - 1) /
                           static_cast<double>(n_new - 1);
          const std::size_t lo = std::min(static_cast<std::size_t>(x), n_old - 1);
          const double frac = x - static_cast<double>(lo);
          resampled[j] = frac == 0.0 ? old_at(lo) : (1.0 - frac) * old_at(lo) + frac * old_at(lo + 1);
        }
        double new_mean = 0.0;
        for (double v : resampled) new_mean += v;
        new_mean /= static_cast<double>(n_new);
        for (double& v : resampled) v += old_mean - new_mean;
      }
      for (std::size_t j = 0; j < n_new; ++j) w_new[(o * n_new + j) * 9 + tap] = resampled[j];
    }
  }
  return out;
}

enum class Split { Train, Test };

struct LabeledCube {
  HsiCube cube;
  std::size_t label = 0;
  Split split = Split::Train;
};

struct ProbeOptions {
  std::size_t iterations = 500;
  double learning_rate = 0.5;
  double l2 = 1e-3;
};

struct ProbeResult {
  double accuracy = 0.0;
  // Per class, over the test split.
  std::vector<std::size_t> test_counts;
  std::vector<std::size_t> correct_counts;
  std::uint64_t seed = 0;
  // CRC-32 of the encoder checkpoint the features came from.
  std::string encoder_hash;
};

// Multinomial logistic regression on frozen, standardized pooled features,
// trained full-batch by gradient descent from zero weights. The encoder's
// stem is adapted when the cubes' band count differs from its input planes.
// `seed` is recorded for provenance; the fit itself is deterministic.
inline ProbeResult linear_probe(const nn::Encoder& encoder, const std::vector<LabeledCube>& data,
                                std::uint64_t seed, const ProbeOptions& opts = {}) {
  require(!data.empty(), "probe dataset is empty");
  const std::size_t bands = data.front().cube.bands();
  for (const auto& d : data) require(d.cube.bands() == bands, "probe cubes must share one band count");
  const nn::Encoder enc =
      encoder.config().in_planes == bands ? encoder : adapt_first_layer(encoder, bands);

  std::size_t classes = 0;
  std::vector<std::size_t> train_labels_seen;
  for (const auto& d : data) {
    classes = std::max(classes, d.label + 1);
    if (d.split == Split::Train &&
        std::find(train_labels_seen.begin(), train_labels_seen.end(), d.label) == train_labels_seen.end()) {
      train_labels_seen.push_back(d.label);
    }
  }
  if (train_labels_seen.size() < 2) {
    fail(ErrorKind::Validation, "linear probe needs at least two classes in the training split");
  }
  const bool has_test = std::any_of(data.begin(), data.end(), [](const auto& d) { return d.split == Split::Test; });
  require(has_test, "linear probe needs a non-empty test split");

  std::vector<std::vector<double>> feats;
  for (const auto& d : data) feats.push_back(enc.features(d.cube));
  const std::size_t dim = feats.front().size();

  // Standardize with training-split statistics.
  std::vector<double> mean(dim, 0.0), sd(dim, 0.0);
  std::size_t n_train = 0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    if (data[s].split != Split::Train) continue;
    ++n_train;
    for (std::size_t j = 0; j < dim; ++j) mean[j] += feats[s][j];
  }
  for (double& m : mean) m /= static_cast<double>(n_train);
  for (std::size_t s = 0; s < data.size(); ++s) {
    if (data[s].split != Split::Train) continue;
    for (std::size_t j = 0; j < dim; ++j) sd[j] += (feats[s][j] - mean[j]) * (feats[s][j] - mean[j]);
  }
  for (double& v : sd) v = std::sqrt(v / static_cast<double>(n_train));
  for (auto& f : feats) {
    for (std::size_t j = 0; j < dim; ++j) f[j] = sd[j] > 1e-12 ? (f[j] - mean[j]) / sd[j] : 0.0;
  }

  // weights: classes x (dim + 1), last column is the bias.
  const std::size_t stride = dim + 1;
  std::vector<double> w(classes * stride, 0.0), grad(classes * stride);
  std::vector<double> prob(classes);
  auto softmax = [&](const std::vector<double>& x) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < classes; ++k) {
      double z = w[k * stride + dim];
      for (std::size_t j = 0; j < dim; ++j) z += w[k * stride + j] * x[j];
      prob[k] = z;
      mx = std::max(mx, z);
    }
    double sum = 0.0;
    for (double& p : prob) {
      p = std::exp(p - mx);
      sum += p;
    }
    for (double& p : prob) p /= sum;
  };
  for (std::size_t it = 0; it < opts.iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t s = 0; s < data.size(); ++s) {
      if (data[s].split != Split::Train) continue;
      softmax(feats[s]);
      for (std::size_t k = 0; k < classes; ++k) {
        const double e = prob[k] - (k == data[s].label ? 1.0 : 0.0);
        for (std::size_t j = 0; j < dim; ++j) grad[k * stride + j] += e * feats[s][j];
        grad[k * stride + dim] += e;
      }
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      const bool bias = i % stride == dim;
      const double g = grad[i] / static_cast<double>(n_train) + (bias ? 0.0 : opts.l2 * w[i]);
      w[i] -= opts.learning_rate * g;
    }
  }

  ProbeResult r;
  r.seed = seed;
  r.encoder_hash = checkpoint_hash(encoder);
  r.test_counts.assign(classes, 0);
  r.correct_counts.assign(classes, 0);
  std::size_t correct = 0, total = 0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    if (data[s].split != Split::Test) continue;
    softmax(feats[s]);
    const auto pred = static_cast<std::size_t>(std::max_element(prob.begin(), prob.end()) - prob.begin());
    ++r.test_counts[data[s].label];
    ++total;
    if (pred == data[s].label) {
      ++r.correct_counts[data[s].label];
      ++correct;
    }
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  return r;
}

// ---------------------------------------------------------------------------
// Labeled synthetic dataset for the probe

struct ClassDatasetSpec {
  std::size_t classes = 3;
  std::size_t train_per_class = 20;
  std::size_t test_per_class = 10;
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t bands = 8;
  std::size_t rank = 3;
  double noise_sigma = 0.01;
  double spectral_smoothness = 1.5;
  // Classes share one base library; each class shifts every signature centre
  // by up to this many bands. Infinite means independent libraries.
  double class_shift = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;

  void validate() const {
    require(class_shift > 0.0, "class dataset: class_shift must be > 0");
    require(classes >= 1, "class dataset: classes must be >= 1");
    require(train_per_class + test_per_class >= 1, "class dataset: needs at least one cube per class");
    SyntheticSpec probe{height, width, bands, rank, noise_sigma, spectral_smoothness, seed, {}, {}, {}};
    probe.validate();
  }
};

// Each class owns one set of endmember signatures; every cube mixes that set
// with its own random abundance maps. Cubes are ordered class-major, train
// cubes first within each class.
inline std::vector<LabeledCube> make_class_dataset(const ClassDatasetSpec& spec) {
  spec.validate();
  std::vector<LabeledCube> out;
  const double top = static_cast<double>(spec.bands - 1);
  Rng base_rng(derive_seed(spec.seed, {50}));
  std::vector<double> base_center(spec.rank), base_amplitude(spec.rank);
  for (std::size_t r = 0; r < spec.rank; ++r) {
    base_center[r] = base_rng.uniform(0.0, top);
    base_amplitude[r] = base_rng.uniform(0.5, 1.0);
  }
  for (std::size_t k = 0; k < spec.classes; ++k) {
    Rng class_rng(derive_seed(spec.seed, {100, k}));
    std::vector<std::vector<double>> signatures;
    for (std::size_t r = 0; r < spec.rank; ++r) {
      double center = class_rng.uniform(0.0, top);
      double amplitude = class_rng.uniform(0.5, 1.0);
      if (std::isfinite(spec.class_shift)) {
        center = std::clamp(base_center[r] + (2.0 * (center / top) - 1.0) * spec.class_shift, 0.0, top);
        amplitude = base_amplitude[r];
      }
      signatures.push_back(
          gaussian_signature(spec.bands, center, spec.spectral_smoothness, amplitude));
    }
    const std::size_t per_class = spec.train_per_class + spec.test_per_class;
    for (std::size_t i = 0; i < per_class; ++i) {
      Rng rng(derive_seed(spec.seed, {200, k, i}));
      Rng noise_rng(derive_seed(spec.seed, {300, k, i}));
      std::vector<std::vector<double>> abundances;
      for (std::size_t r = 0; r < spec.rank; ++r) {
        abundances.push_back(synthetic_abundance(spec.height, spec.width, rng));
      }
      out.push_back(LabeledCube{mix_cube(spec.height, spec.width, spec.bands, abundances, signatures,
                                         spec.noise_sigma, noise_rng),
                                k, i < spec.train_per_class ? Split::Train : Split::Test});
    }
  }
  return out;
}

}  // namespace specreg
