#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include "specreg/checkpoint.hpp"
#include "specreg/pretrain.hpp"
#include "support.hpp"

using namespace specreg;

namespace {

std::vector<HsiCube> synthetic_set(std::size_t count, std::size_t size, std::size_t bands,
                                   std::uint64_t seed) {
  std::vector<HsiCube> cubes;
  for (std::size_t i = 0; i < count; ++i) {
    SyntheticSpec s;
    s.height = s.width = size;
    s.bands = bands;
    s.rank = 2;
    s.noise_sigma = 0.01;
    s.seed = seed + i;
    cubes.push_back(generate_synthetic(s));
  }
  return cubes;
}

TrainConfig small_config(PretextTask task) {
  TrainConfig c;
  c.task = task;
  c.stem_channels = 4;
  c.num_stages = 2;
  c.head_hidden = 8;
  c.batch_size = 2;
  c.seed = 5;
  c.record_wall_time = false;
  return c;
}

}  // namespace

TEST(SamplePretext, TwoBandCube) {
  auto c = testing_support::random_cube(4, 4, 2, 1);
  auto table = oracle_coefficients(c);
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    auto s = sample_pretext(c, &table, rng, PretextTask::CoefficientRegression);
    EXPECT_LT(s.band, 2u);
    EXPECT_EQ(s.masked_input.bands(), 1u);
    EXPECT_EQ(s.beta_tilde, table[s.band]);
    EXPECT_EQ(s.target, extract_band(c, s.band));
  }
}

TEST(SamplePretext, ReproducibleAndMasked) {
  auto c = testing_support::random_cube(16, 16, 5, 2, 1.0, 2.0);
  Rng a(9), b(9);
  for (int i = 0; i < 10; ++i) {
    auto sa = sample_pretext(c, nullptr, a, PretextTask::BandRegression);
    auto sb = sample_pretext(c, nullptr, b, PretextTask::BandRegression);
    EXPECT_EQ(sa.band, sb.band);
    EXPECT_EQ(sa.masked_input, sb.masked_input);
    EXPECT_EQ(sa.remaining, remaining_bands(c, sa.band));
    std::size_t zeros = 0;
    for (double v : sa.masked_input.data()) zeros += v == 0.0;
    const double frac = static_cast<double>(zeros) / static_cast<double>(sa.masked_input.data().size());
    EXPECT_GE(frac, 0.65);
    EXPECT_LE(frac, 0.65 + 4.0 / 256.0);
  }
}

TEST(SamplePretext, BandIsUniform) {
  auto c = testing_support::random_cube(8, 8, 6, 3);
  Rng rng(4);
  std::vector<double> counts(6, 0.0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) counts[sample_pretext(c, nullptr, rng, PretextTask::BandRegression).band] += 1;
  double stat = 0.0;
  for (double n : counts) stat += (n - draws / 6.0) * (n - draws / 6.0) / (draws / 6.0);
  EXPECT_LT(stat, boost::math::quantile(boost::math::chi_squared(5.0), 0.99));
}

TEST(SamplePretext, CrNeedsTable) {
  auto c = testing_support::random_cube(4, 4, 3, 5);
  Rng rng(1);
  try {
    sample_pretext(c, nullptr, rng, PretextTask::CoefficientRegression);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("solve"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("--all-bands"), std::string::npos);
  }
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.epochs_max = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.early_stop_patience = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  EXPECT_EQ(c.epochs_max, 200u);
  EXPECT_EQ(c.lr0, 1e-4);
  EXPECT_EQ(c.gamma, 0.99);
  EXPECT_EQ(c.batch_size, 8u);
  EXPECT_EQ(c.early_stop_patience, 20u);
  EXPECT_NO_THROW(c.validate());
}

TEST(Train, SingleEpoch) {
  auto cfg = small_config(PretextTask::CoefficientRegression);
  cfg.epochs_max = 1;
  auto r = train(cfg, with_oracle_tables(synthetic_set(3, 8, 5, 10)));
  ASSERT_EQ(r.log.epochs.size(), 1u);
  EXPECT_EQ(r.log.status, RunStatus::Completed);
  EXPECT_EQ(r.log.epochs[0].epoch, 0u);
}

TEST(Train, FrozenLearningRateStopsEarly) {
  auto cfg = small_config(PretextTask::BandRegression);
  cfg.lr0 = 0.0;
  cfg.early_stop_patience = 1;
  cfg.resample_each_epoch = false;
  cfg.epochs_max = 10;
  PretrainSet set;
  set.cubes = synthetic_set(3, 8, 5, 20);
  auto r = train(cfg, set);
  EXPECT_EQ(r.log.status, RunStatus::EarlyStopped);
  ASSERT_EQ(r.log.epochs.size(), 2u);
  EXPECT_EQ(r.log.epochs[0].loss, r.log.epochs[1].loss);
  EXPECT_EQ(r.log.best_epoch, 0u);
}

TEST(Train, ReproducibleAndScheduled) {
  auto cfg = small_config(PretextTask::CoefficientRegression);
  cfg.epochs_max = 4;
  cfg.lr0 = 1e-3;
  cfg.gamma = 0.9;
  auto set = with_oracle_tables(synthetic_set(4, 8, 5, 30));
  auto a = train(cfg, set);
  auto b = train(cfg, set);
  EXPECT_EQ(format_run_log(a.log), format_run_log(b.log));
  EXPECT_EQ(encode_checkpoint(a.encoder), encode_checkpoint(b.encoder));
  for (std::size_t e = 0; e < a.log.epochs.size(); ++e) {
    EXPECT_EQ(a.log.epochs[e].epoch, e);
    EXPECT_EQ(a.log.epochs[e].lr, nn::lr_schedule(e, 1e-3, 0.9));
    EXPECT_TRUE(std::isfinite(a.log.epochs[e].loss));
  }
  cfg.seed = 6;
  EXPECT_NE(format_run_log(train(cfg, set).log), format_run_log(a.log));
}

TEST(Train, EarlyStopPropertyAndBestCheckpoint) {
  auto cfg = small_config(PretextTask::BandRegression);
  cfg.lr0 = 1e-2;
  cfg.epochs_max = 60;
  cfg.early_stop_patience = 3;
  PretrainSet set;
  set.cubes = synthetic_set(3, 8, 5, 40);
  auto r = train(cfg, set);
  const auto& ep = r.log.epochs;
  double best = ep[0].loss;
  std::size_t best_epoch = 0;
  for (std::size_t e = 1; e < ep.size(); ++e) {
    if (ep[e].loss < best - 1e-4 * std::abs(best)) {
      best = ep[e].loss;
      best_epoch = e;
    }
  }
  EXPECT_EQ(r.log.best_epoch, best_epoch);
  if (r.log.status == RunStatus::EarlyStopped) {
    ASSERT_GE(ep.size(), cfg.early_stop_patience + 1);
    for (std::size_t e = ep.size() - cfg.early_stop_patience; e < ep.size(); ++e) {
      EXPECT_GE(ep[e].loss, best - 1e-4 * std::abs(best));
    }
  }
}

TEST(Train, RejectsBadDatasets) {
  auto cfg = small_config(PretextTask::CoefficientRegression);
  cfg.epochs_max = 1;
  EXPECT_THROW(train(cfg, PretrainSet{}), Error);
  PretrainSet no_tables;
  no_tables.cubes = synthetic_set(2, 8, 5, 50);
  EXPECT_THROW(train(cfg, no_tables), Error);
  auto mixed = synthetic_set(1, 8, 5, 60);
  mixed.push_back(synthetic_set(1, 8, 6, 61).front());
  try {
    train(cfg, with_oracle_tables(mixed));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Validation);
  }
}

TEST(Train, NonFiniteLossAborts) {
  auto cfg = small_config(PretextTask::BandRegression);
  cfg.epochs_max = 1;
  PretrainSet set;
  std::vector<double> data(8 * 8 * 5, 1e308);
  set.cubes.push_back(HsiCube(8, 8, 5, std::move(data)));
  cfg.mask.target_ratio = 0.01;
  try {
    train(cfg, set);
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.is_numerical());
  }
}

TEST(LoadPretrainSet, MissingTable) {
  testing_support::TempDir dir;
  write_cube(synthetic_set(1, 8, 5, 70).front(), dir / "a.s3rc");
  try {
    load_pretrain_set({dir / "a.s3rc"}, PretextTask::CoefficientRegression);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("--all-bands"), std::string::npos);
  }
  EXPECT_NO_THROW(load_pretrain_set({dir / "a.s3rc"}, PretextTask::BandRegression));
}

TEST(BetaStats, ShapesAndZeroHead) {
  auto cubes = synthetic_set(2, 8, 5, 80);
  auto enc = nn::Encoder::initialize(nn::EncoderConfig{4, 4, 2, 8, 4}, 1);
  auto rows = export_beta_stats(enc, cubes);
  ASSERT_EQ(rows.size(), 10u);
  for (const auto& r : rows) EXPECT_EQ(r.values.size(), 4u);
  enc.parameter("head.fc2.weight").value.assign(enc.parameter("head.fc2.weight").size(), 0.0);
  for (const auto& r : export_beta_stats(enc, cubes))
    for (double v : r.values) EXPECT_EQ(v, 0.0);
  const auto csv = format_beta_stats(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "cube,target_band,beta_0,beta_1,beta_2,beta_3");
  EXPECT_THROW(export_beta_stats(enc, synthetic_set(1, 8, 6, 81)), Error);
}

TEST(Locality, OracleTableOnSmoothCubes) {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SyntheticSpec s;
    s.height = s.width = 32;
    s.bands = 16;
    s.rank = 5;
    s.spectral_smoothness = 3.0;
    s.noise_sigma = 0.01;
    s.seed = seed;
    total += locality_fraction(oracle_coefficients(generate_synthetic(s)));
  }
  EXPECT_GE(total / 10.0, 0.8);

  OracleTable far{CoefficientVector{0, {0.0, 0.0, 0.0, 1.0, 1.0}}};
  EXPECT_EQ(locality_fraction(far), 0.0);
  OracleTable near{CoefficientVector{3, {0.0, 0.0, 1.0, 1.0, 0.0}}};
  EXPECT_EQ(locality_fraction(near), 1.0);
}

TEST(AdaptFirstLayer, SameCountIsIdentical) {
  auto enc = nn::Encoder::initialize(nn::pretext_config(6), 1);
  EXPECT_EQ(encode_checkpoint(adapt_first_layer(enc, 5)), encode_checkpoint(enc));
}

TEST(AdaptFirstLayer, SinglePlaneIsMean) {
  auto enc = nn::Encoder::initialize(nn::EncoderConfig{4, 3, 1, 4, 4}, 2);
  auto one = adapt_first_layer(enc, 1);
  const auto& w = enc.parameter("stem.weight").value;
  const auto& w1 = one.parameter("stem.weight").value;
  ASSERT_EQ(w1.size(), 3u * 9);
  for (std::size_t o = 0; o < 3; ++o) {
    for (std::size_t t = 0; t < 9; ++t) {
      double mean = 0.0;
      for (std::size_t i = 0; i < 4; ++i) mean += w[(o * 4 + i) * 9 + t];
      EXPECT_NEAR(w1[o * 9 + t], mean / 4.0, 1e-15);
    }
  }
}

TEST(AdaptFirstLayer, PreservesOtherParametersAndMeans) {
  auto enc = nn::Encoder::initialize(nn::pretext_config(8), 3);
  for (std::size_t n : {2u, 5u, 11u, 39u}) {
    auto a = adapt_first_layer(enc, n);
    EXPECT_EQ(a.config().in_planes, n);
    for (std::size_t k = 1; k < a.parameters().size(); ++k) {
      EXPECT_EQ(a.parameters()[k].value, enc.parameters()[k].value);
    }
    const auto& w = enc.parameter("stem.weight").value;
    const auto& wn = a.parameter("stem.weight").value;
    for (std::size_t o = 0; o < 16; ++o) {
      for (std::size_t t = 0; t < 9; ++t) {
        double m_old = 0.0, m_new = 0.0;
        for (std::size_t i = 0; i < 7; ++i) m_old += w[(o * 7 + i) * 9 + t] / 7.0;
        for (std::size_t i = 0; i < n; ++i) m_new += wn[(o * n + i) * 9 + t] / static_cast<double>(n);
        EXPECT_NEAR(m_old, m_new, 1e-12);
      }
    }
    auto c = testing_support::random_cube(8, 8, n, n);
    EXPECT_NO_THROW(a.features(c));
  }
  EXPECT_THROW(adapt_first_layer(enc, 0), Error);
}

TEST(AdaptFirstLayer, UpsamplingInterpolatesEndpoints) {
  auto enc = nn::Encoder::initialize(nn::EncoderConfig{2, 1, 1, 2, 1}, 4);
  auto a = adapt_first_layer(enc, 3);
  const auto& w = enc.parameter("stem.weight").value;
  const auto& wn = a.parameter("stem.weight").value;
  for (std::size_t t = 0; t < 9; ++t) {
    // Linear interpolation of [p, q] to [p, (p+q)/2, q] keeps the mean.
    EXPECT_NEAR(wn[0 * 9 + t], w[0 * 9 + t], 1e-15);
    EXPECT_NEAR(wn[1 * 9 + t], 0.5 * (w[t] + w[9 + t]), 1e-15);
    EXPECT_NEAR(wn[2 * 9 + t], w[9 + t], 1e-15);
  }
}

TEST(LinearProbe, SeparableClasses) {
  ClassDatasetSpec spec;
  spec.train_per_class = 8;
  spec.test_per_class = 4;
  spec.seed = 3;
  auto data = make_class_dataset(spec);
  ASSERT_EQ(data.size(), 36u);
  auto enc = nn::Encoder::initialize(nn::pretext_config(8, 8, 2, 16), 1);
  auto a = linear_probe(enc, data, 7);
  auto b = linear_probe(enc, data, 7);
  EXPECT_EQ(a.accuracy, b.accuracy);
  EXPECT_GE(a.accuracy, 0.0);
  EXPECT_LE(a.accuracy, 1.0);
  EXPECT_EQ(a.seed, 7u);
  EXPECT_EQ(a.encoder_hash, checkpoint_hash(enc));
  std::size_t total = 0, correct = 0;
  for (std::size_t k = 0; k < a.test_counts.size(); ++k) {
    total += a.test_counts[k];
    correct += a.correct_counts[k];
    EXPECT_LE(a.correct_counts[k], a.test_counts[k]);
  }
  EXPECT_EQ(total, 12u);
  EXPECT_DOUBLE_EQ(a.accuracy, static_cast<double>(correct) / 12.0);
}

TEST(LinearProbe, AdaptsBandCount) {
  ClassDatasetSpec spec;
  spec.train_per_class = 3;
  spec.test_per_class = 2;
  spec.bands = 10;
  auto data = make_class_dataset(spec);
  auto enc = nn::Encoder::initialize(nn::pretext_config(6, 4, 2, 8), 1);
  EXPECT_NO_THROW(linear_probe(enc, data, 1));
}

TEST(LinearProbe, SingleClassIsRejected) {
  ClassDatasetSpec spec;
  spec.classes = 1;
  spec.train_per_class = 3;
  spec.test_per_class = 2;
  auto data = make_class_dataset(spec);
  auto enc = nn::Encoder::initialize(nn::pretext_config(8, 4, 2, 8), 1);
  try {
    linear_probe(enc, data, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Validation);
  }
}

TEST(ClassDataset, SharedLibraryShift) {
  ClassDatasetSpec spec;
  spec.class_shift = 0.5;
  spec.train_per_class = 2;
  spec.test_per_class = 1;
  auto a = make_class_dataset(spec);
  auto b = make_class_dataset(spec);
  ASSERT_EQ(a.size(), 9u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].cube, b[i].cube);
  EXPECT_EQ(a[0].split, Split::Train);
  EXPECT_EQ(a[2].split, Split::Test);
  EXPECT_EQ(a[3].label, 1u);
  spec.class_shift = 0.0;
  EXPECT_THROW(make_class_dataset(spec), Error);
}
