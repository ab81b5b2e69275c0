#include <gtest/gtest.h>

#include "specreg/cube.hpp"
#include "specreg/solver.hpp"
#include "support.hpp"

using namespace specreg;
using testing_support::random_cube;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::State;
}

}  // namespace

TEST(Cube, RejectsBadShapes) {
  EXPECT_EQ(kind_of([] { HsiCube(2, 2, 1, std::vector<double>(4)); }), ErrorKind::InvariantViolation);
  EXPECT_EQ(kind_of([] { HsiCube(2, 2, 2, std::vector<double>(7)); }), ErrorKind::InvariantViolation);
  EXPECT_EQ(kind_of([] { HsiCube(0, 2, 2, {}); }), ErrorKind::InvariantViolation);
  EXPECT_EQ(kind_of([] {
              HsiCube(1, 1, 2, {0.0, std::numeric_limits<double>::quiet_NaN()});
            }),
            ErrorKind::InvariantViolation);
  EXPECT_EQ(kind_of([] { HsiCube(1, 1, 2, {0.0, 1.0}, std::vector<double>{500.0, 500.0}); }),
            ErrorKind::InvariantViolation);
  EXPECT_EQ(kind_of([] { HsiCube(1, 1, 2, {0.0, 1.0}, std::vector<double>{500.0}); }),
            ErrorKind::InvariantViolation);
}

TEST(Cube, BandStackAllowsOnePlane) {
  BandStack s(2, 2, 1, std::vector<double>(4, 1.0));
  EXPECT_EQ(s.bands(), 1u);
}

TEST(Cube, ExtractBandOutOfRange) {
  auto c = random_cube(3, 3, 5, 1);
  EXPECT_EQ(kind_of([&] { extract_band(c, 5); }), ErrorKind::Index);
  EXPECT_EQ(kind_of([&] { remaining_bands(c, 9); }), ErrorKind::Index);
}

TEST(Cube, TwoBandsRemainingIsOtherBand) {
  auto c = random_cube(4, 3, 2, 2);
  auto r = remaining_bands(c, 0);
  ASSERT_EQ(r.bands(), 1u);
  auto expect = c.band(1);
  EXPECT_TRUE(std::equal(expect.begin(), expect.end(), r.band(0).begin()));
}

TEST(Cube, RemainingOrderSkipsTarget) {
  // Each band is filled with its own index.
  std::vector<double> data;
  for (int b = 0; b < 40; ++b) data.insert(data.end(), 4, static_cast<double>(b));
  HsiCube c(2, 2, 40, std::move(data));
  auto r = remaining_bands(c, 17);
  ASSERT_EQ(r.bands(), 39u);
  for (std::size_t i = 0; i < 39; ++i) {
    EXPECT_EQ(r.at(i, 0, 0), static_cast<double>(i < 17 ? i : i + 1));
    EXPECT_EQ(source_band(17, i), i < 17 ? i : i + 1);
  }
}

TEST(Cube, ExtractInsertReconstructsForEveryBand) {
  auto c = random_cube(5, 7, 9, 3);
  for (std::size_t b = 0; b < c.bands(); ++b) {
    auto plane = extract_band(c, b);
    auto rest = remaining_bands(c, b);
    EXPECT_EQ(insert_band(rest, plane, b), c) << "band " << b;
  }
}

TEST(Cube, ExtractAndRemainingPartitionBands) {
  auto c = random_cube(3, 4, 6, 4);
  for (std::size_t b = 0; b < c.bands(); ++b) {
    std::vector<std::vector<double>> parts;
    auto plane = extract_band(c, b);
    parts.push_back(plane.data);
    auto rest = remaining_bands(c, b);
    for (std::size_t i = 0; i < rest.bands(); ++i) parts.emplace_back(rest.band(i).begin(), rest.band(i).end());
    std::vector<std::vector<double>> original;
    for (std::size_t i = 0; i < c.bands(); ++i) original.emplace_back(c.band(i).begin(), c.band(i).end());
    std::sort(parts.begin(), parts.end());
    std::sort(original.begin(), original.end());
    EXPECT_EQ(parts, original);
  }
}

TEST(Cube, OutputsAreCopies) {
  auto c = random_cube(3, 3, 3, 5);
  const auto before = c;
  auto plane = extract_band(c, 1);
  plane.data[0] = 1e9;
  EXPECT_EQ(c, before);
}

TEST(Cube, WavelengthsFollowRemainingBands) {
  HsiCube c(1, 1, 3, {1, 2, 3}, std::vector<double>{400, 500, 600});
  auto r = remaining_bands(c, 1);
  ASSERT_TRUE(r.wavelengths_nm());
  EXPECT_EQ(*r.wavelengths_nm(), (std::vector<double>{400, 600}));
}

TEST(Normalize, MapsMinMaxToUnitInterval) {
  HsiCube c(1, 2, 2, {10, 15, 20, 12.5});
  auto n = normalize(c);
  EXPECT_EQ(std::vector<double>(n.data().begin(), n.data().end()), (std::vector<double>{0, 0.5, 1, 0.25}));
}

TEST(Normalize, ConstantCubeBecomesZeros) {
  HsiCube c(2, 2, 2, std::vector<double>(8, 3.0));
  auto n = normalize(c);
  for (double v : n.data()) EXPECT_EQ(v, 0.0);
}

TEST(Normalize, CommonScaleKeepsCoefficients) {
  // min = 0, so normalization is a pure common scaling.
  auto c = random_cube(8, 8, 5, 6, 0.0, 40.0);
  std::vector<double> d(c.data().begin(), c.data().end());
  d[0] = 0.0;
  HsiCube cz(8, 8, 5, std::move(d));
  auto n = normalize(cz);
  for (std::size_t b = 0; b < 5; ++b) {
    auto a = fit_closed_form(cz, b).coefficients.values;
    auto z = fit_closed_form(n, b).coefficients.values;
    EXPECT_LE(testing_support::max_abs_diff(a, z), 1e-10);
  }
}

TEST(Synthetic, Deterministic) {
  SyntheticSpec s;
  s.noise_sigma = 0.01;
  s.seed = 77;
  EXPECT_EQ(encode_cube(generate_synthetic(s)), encode_cube(generate_synthetic(s)));
  auto other = s;
  other.seed = 78;
  EXPECT_NE(encode_cube(generate_synthetic(s)), encode_cube(generate_synthetic(other)));
}

TEST(Synthetic, ValidatesSpec) {
  SyntheticSpec s;
  s.rank = 7;  // rank + 1 must be < bands
  EXPECT_THROW(generate_synthetic(s), Error);
  s = {};
  s.bands = 1;
  EXPECT_THROW(generate_synthetic(s), Error);
  s = {};
  s.noise_sigma = -1.0;
  EXPECT_THROW(generate_synthetic(s), Error);
}

TEST(Synthetic, LowRankResidualForEveryBand) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SyntheticSpec s;
    s.seed = seed;
    auto c = generate_synthetic(s);
    for (std::size_t b = 0; b < c.bands(); ++b) {
      auto fit = fit_closed_form(c, b, 1e-12);
      auto plane = c.band(b);
      double norm = 0.0;
      for (double v : plane) norm += v * v;
      EXPECT_LE(fit.residual_fro, 1e-9 * std::sqrt(norm)) << "seed " << seed << " band " << b;
    }
  }
}

TEST(Synthetic, WavelengthsSpanRange) {
  auto s = plgc_geometry();
  s.height = s.width = 8;
  auto c = generate_synthetic(s);
  ASSERT_TRUE(c.wavelengths_nm());
  EXPECT_EQ(c.wavelengths_nm()->front(), 470.0);
  EXPECT_EQ(c.wavelengths_nm()->back(), 670.0);
  EXPECT_EQ(c.bands(), 32u);
  const auto p = pdac_geometry();
  EXPECT_EQ(p.bands, 40u);
  EXPECT_EQ(p.width, 612u);
}

TEST(Container, RoundTripIsBitExact) {
  testing_support::TempDir dir;
  auto c = quantize_f32(random_cube(6, 5, 4, 8));
  write_cube(c, dir / "a.s3rc");
  EXPECT_EQ(read_cube(dir / "a.s3rc"), c);

  HsiCube w(1, 2, 2, {0.25, 0.5, 1.0, 2.0}, std::vector<double>{450.5, 700.25});
  write_cube(w, dir / "w.s3rc");
  EXPECT_EQ(read_cube(dir / "w.s3rc"), w);
}

TEST(Container, HeaderLayout) {
  HsiCube c(2, 3, 2, std::vector<double>(12, 1.0));
  const auto bytes = encode_cube(c);
  ASSERT_EQ(bytes.size(), 4 + 4 * 4 + 1 + 12 * 4u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "S3RC");
  io::ByteReader r(bytes);
  r.bytes(4);
  EXPECT_EQ(r.u32(), 1u);
  EXPECT_EQ(r.u32(), 2u);
  EXPECT_EQ(r.u32(), 3u);
  EXPECT_EQ(r.u32(), 2u);
  EXPECT_EQ(r.u8(), 0u);
  EXPECT_EQ(r.f32(), 1.0f);
}

TEST(Container, RejectsCorruptInput) {
  auto bytes = encode_cube(random_cube(2, 2, 3, 9));
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_EQ(kind_of([&] { decode_cube(bad); }), ErrorKind::BadMagic);
  bad = bytes;
  bad[4] = 9;
  EXPECT_EQ(kind_of([&] { decode_cube(bad); }), ErrorKind::UnsupportedVersion);
  bad = bytes;
  bad.pop_back();
  EXPECT_EQ(kind_of([&] { decode_cube(bad); }), ErrorKind::Truncated);
  bad = std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 10);
  EXPECT_EQ(kind_of([&] { decode_cube(bad); }), ErrorKind::Truncated);
  bad = bytes;
  bad.push_back(0);
  EXPECT_EQ(kind_of([&] { decode_cube(bad); }), ErrorKind::InvariantViolation);
  bad = bytes;
  bad[20] = 2;  // has_wavelengths flag
  EXPECT_EQ(kind_of([&] { decode_cube(bad); }), ErrorKind::InvariantViolation);
  bad = bytes;
  bad[16] = 1;  // B = 1
  EXPECT_EQ(kind_of([&] { decode_cube(bad); }), ErrorKind::InvariantViolation);
  EXPECT_EQ(kind_of([&] { read_cube("/nonexistent/x.s3rc"); }), ErrorKind::Io);
}
