#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "specreg/error.hpp"
#include "specreg/io.hpp"
#include "specreg/rng.hpp"

namespace specreg {

// A single H x W intensity plane, row-major.
struct BandImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;

  std::size_t pixels() const noexcept { return height * width; }
  bool operator==(const BandImage&) const = default;
};

// Stack of H x W planes in band-sequential layout:
// data[b * H * W + y * W + x]. Intensities are held in double precision;
// the on-disk container stores them as f32. Immutable once constructed.
//
// A stack may hold a single plane; it is the type of the B-1 remaining bands
// and of masked encoder inputs.
class BandStack {
 public:
  BandStack(std::size_t height, std::size_t width, std::size_t bands, std::vector<double> data,
            std::optional<std::vector<double>> wavelengths_nm = std::nullopt)
      : height_(height),
        width_(width),
        bands_(bands),
        data_(std::move(data)),
        wavelengths_(std::move(wavelengths_nm)) {
    validate();
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t bands() const noexcept { return bands_; }
  std::size_t pixels() const noexcept { return height_ * width_; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<const double> band(std::size_t b) const {
    check_band(b);
    return std::span<const double>(data_).subspan(b * pixels(), pixels());
  }
  double at(std::size_t b, std::size_t y, std::size_t x) const noexcept {
    return data_[(b * height_ + y) * width_ + x];
  }
  const std::optional<std::vector<double>>& wavelengths_nm() const noexcept { return wavelengths_; }

  void check_band(std::size_t b) const {
    if (b >= bands_) {
      fail(ErrorKind::Index, "band index " + std::to_string(b) + " out of range [0, " +
                                 std::to_string(bands_) + ")");
    }
  }

  bool operator==(const BandStack&) const = default;

 protected:
  static void violated(const std::string& what) { fail(ErrorKind::InvariantViolation, what); }

 private:
  void validate() const {
    if (bands_ < 1) violated("band stack needs at least one band");
    if (height_ < 1 || width_ < 1) violated("cube needs height >= 1 and width >= 1");
    if (data_.size() != height_ * width_ * bands_) {
      violated("cube data has " + std::to_string(data_.size()) + " elements, expected " +
               std::to_string(height_ * width_ * bands_));
    }
    for (double v : data_) {
      if (!std::isfinite(v)) violated("cube contains a non-finite intensity");
    }
    if (wavelengths_) {
      const auto& wl = *wavelengths_;
      if (wl.size() != bands_) violated("wavelength count must equal band count");
      for (std::size_t i = 0; i < wl.size(); ++i) {
        if (!std::isfinite(wl[i])) violated("non-finite wavelength");
        if (i > 0 && !(wl[i] > wl[i - 1])) violated("wavelengths must be strictly increasing");
      }
    }
  }

  std::size_t height_;
  std::size_t width_;
  std::size_t bands_;
  std::vector<double> data_;
  std::optional<std::vector<double>> wavelengths_;
};

// A full hyperspectral image: a band stack with at least two bands.
class HsiCube : public BandStack {
 public:
  HsiCube(std::size_t height, std::size_t width, std::size_t bands, std::vector<double> data,
          std::optional<std::vector<double>> wavelengths_nm = std::nullopt)
      : BandStack(height, width, bands, std::move(data), std::move(wavelengths_nm)) {
    if (this->bands() < 2) violated("cube needs bands >= 2, got " + std::to_string(this->bands()));
  }

  bool operator==(const HsiCube&) const = default;
};

// ---------------------------------------------------------------------------
// Band extraction

inline BandImage extract_band(const BandStack& cube, std::size_t b) {
  auto plane = cube.band(b);
  return BandImage{cube.height(), cube.width(), std::vector<double>(plane.begin(), plane.end())};
}

// All bands except b, in ascending band order. Wavelengths follow the bands.
inline BandStack remaining_bands(const HsiCube& cube, std::size_t b) {
  cube.check_band(b);
  std::vector<double> out;
  out.reserve(cube.pixels() * (cube.bands() - 1));
  std::optional<std::vector<double>> wl;
  if (cube.wavelengths_nm()) wl.emplace();
  for (std::size_t i = 0; i < cube.bands(); ++i) {
    if (i == b) continue;
    auto plane = cube.band(i);
    out.insert(out.end(), plane.begin(), plane.end());
    if (wl) wl->push_back((*cube.wavelengths_nm())[i]);
  }
  return BandStack(cube.height(), cube.width(), cube.bands() - 1, std::move(out), std::move(wl));
}

// Inverse of the extract/remaining split: puts `plane` back at position b.
inline HsiCube insert_band(const BandStack& remaining, const BandImage& plane, std::size_t b,
                           std::optional<std::vector<double>> wavelengths_nm = std::nullopt) {
  require(plane.height == remaining.height() && plane.width == remaining.width(),
          "inserted band shape does not match the stack");
  require(b <= remaining.bands(), "insert position out of range", ErrorKind::Index);
  std::vector<double> out;
  out.reserve(remaining.pixels() * (remaining.bands() + 1));
  for (std::size_t i = 0; i <= remaining.bands(); ++i) {
    if (i == b) {
      out.insert(out.end(), plane.data.begin(), plane.data.end());
    }
    if (i < remaining.bands()) {
      auto src = remaining.band(i);
      out.insert(out.end(), src.begin(), src.end());
    }
  }
  return HsiCube(remaining.height(), remaining.width(), remaining.bands() + 1, std::move(out),
                 std::move(wavelengths_nm));
}

// Maps a position in the remaining-band order back to the cube band index.
constexpr std::size_t source_band(std::size_t target, std::size_t position) noexcept {
  return position < target ? position : position + 1;
}

// ---------------------------------------------------------------------------
// Normalization

// One global affine map of all intensities onto [0, 1]. A constant cube maps
// to zeros.
inline HsiCube normalize(const HsiCube& cube) {
  auto data = cube.data();
  const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
  const double min = *lo;
  const double range = *hi - *lo;
  std::vector<double> out(data.size(), 0.0);
  if (range > 0.0) {
    for (std::size_t i = 0; i < data.size(); ++i) out[i] = (data[i] - min) / range;
  }
  return HsiCube(cube.height(), cube.width(), cube.bands(), std::move(out), cube.wavelengths_nm());
}

// ---------------------------------------------------------------------------
// Synthetic low-rank generator

struct SyntheticSpec {
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t bands = 8;
  std::size_t rank = 3;
  double noise_sigma = 0.0;
  // Width, in band units, of each Gaussian endmember signature.
  double spectral_smoothness = 3.0;
  std::uint64_t seed = 0;
  // When set, endmember signatures are drawn from this seed instead of `seed`,
  // so a family of cubes can share one spectral library.
  std::optional<std::uint64_t> signature_seed;
  // When both are set, wavelengths are spaced linearly over [min, max].
  std::optional<double> wavelength_min_nm;
  std::optional<double> wavelength_max_nm;

  void validate() const {
    require(bands >= 2, "synthetic spec: bands must be >= 2");
    require(height >= 1 && width >= 1, "synthetic spec: height and width must be >= 1");
    require(rank >= 1, "synthetic spec: rank must be >= 1");
    require(rank + 1 < bands, "synthetic spec: rank must be < bands - 1 (got rank " +
                                  std::to_string(rank) + ", bands " + std::to_string(bands) + ")");
    require(std::isfinite(noise_sigma) && noise_sigma >= 0.0,
            "synthetic spec: noise_sigma must be >= 0");
    require(std::isfinite(spectral_smoothness) && spectral_smoothness > 0.0,
            "synthetic spec: spectral_smoothness must be > 0");
    require(wavelength_min_nm.has_value() == wavelength_max_nm.has_value(),
            "synthetic spec: set both wavelength bounds or neither");
    if (wavelength_min_nm) {
      require(*wavelength_max_nm > *wavelength_min_nm,
              "synthetic spec: wavelength_max_nm must exceed wavelength_min_nm");
    }
  }
};

// Scene geometries of the two histopathology datasets the method targets.
inline SyntheticSpec plgc_geometry() {
  SyntheticSpec s;
  s.height = 512;
  s.width = 512;
  s.bands = 32;
  s.wavelength_min_nm = 470.0;
  s.wavelength_max_nm = 670.0;
  return s;
}

inline SyntheticSpec pdac_geometry() {
  SyntheticSpec s;
  s.height = 512;
  s.width = 612;
  s.bands = 40;
  s.wavelength_min_nm = 450.0;
  s.wavelength_max_nm = 750.0;
  return s;
}

// Smooth nonnegative abundance map: a rectified sum of three low-frequency
// 2-D cosines around a positive offset.
inline std::vector<double> synthetic_abundance(std::size_t height, std::size_t width, Rng& rng) {
  struct Wave {
    double amp, fy, fx, phase;
  };
  Wave waves[3];
  for (auto& w : waves) {
    w.amp = rng.uniform(0.1, 0.4);
    w.fy = rng.uniform(0.0, 2.0);
    w.fx = rng.uniform(0.0, 2.0);
    w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  const double offset = rng.uniform(0.3, 0.7);
  std::vector<double> map(height * width);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      double v = offset;
      for (const auto& w : waves) {
        v += w.amp * std::cos(2.0 * std::numbers::pi *
                                  (w.fy * static_cast<double>(y) / static_cast<double>(height) +
                                   w.fx * static_cast<double>(x) / static_cast<double>(width)) +
                              w.phase);
      }
      map[y * width + x] = std::max(v, 0.0);
    }
  }
  return map;
}

// Gaussian bump over the band axis centred at `center` with the given width.
inline std::vector<double> gaussian_signature(std::size_t bands, double center, double width,
                                              double amplitude) {
  std::vector<double> s(bands);
  for (std::size_t b = 0; b < bands; ++b) {
    const double d = (static_cast<double>(b) - center) / width;
    s[b] = amplitude * std::exp(-0.5 * d * d);
  }
  return s;
}

// Mixes `abundances` (each H*W) with `signatures` (each B long) into a cube and
// adds i.i.d. Gaussian noise. Noisy values are not clamped: clamping would
// break the additive noise model.
inline HsiCube mix_cube(std::size_t height, std::size_t width, std::size_t bands,
                        const std::vector<std::vector<double>>& abundances,
                        const std::vector<std::vector<double>>& signatures, double noise_sigma,
                        Rng& noise_rng, std::optional<std::vector<double>> wavelengths = {}) {
  const std::size_t n = height * width;
  const double scale = 1.0 / static_cast<double>(abundances.size());
  std::vector<double> data(n * bands, 0.0);
  for (std::size_t b = 0; b < bands; ++b) {
    double* plane = data.data() + b * n;
    for (std::size_t k = 0; k < abundances.size(); ++k) {
      const double s = signatures[k][b] * scale;
      for (std::size_t p = 0; p < n; ++p) plane[p] += abundances[k][p] * s;
    }
  }
  if (noise_sigma > 0.0) {
    for (double& v : data) v += noise_sigma * noise_rng.normal();
  }
  return HsiCube(height, width, bands, std::move(data), std::move(wavelengths));
}

inline HsiCube generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, {0}));
  Rng noise_rng(derive_seed(spec.seed, {1}));
  Rng signature_rng(spec.signature_seed ? derive_seed(*spec.signature_seed, {2})
                                        : derive_seed(spec.seed, {2}));
  std::vector<std::vector<double>> abundances;
  std::vector<std::vector<double>> signatures;
  for (std::size_t k = 0; k < spec.rank; ++k) {
    abundances.push_back(synthetic_abundance(spec.height, spec.width, rng));
    const double center = signature_rng.uniform(0.0, static_cast<double>(spec.bands - 1));
    const double amplitude = signature_rng.uniform(0.5, 1.0);
    signatures.push_back(gaussian_signature(spec.bands, center, spec.spectral_smoothness, amplitude));
  }
  std::optional<std::vector<double>> wl;
  if (spec.wavelength_min_nm) {
    wl.emplace(spec.bands);
    const double step = (*spec.wavelength_max_nm - *spec.wavelength_min_nm) /
                        static_cast<double>(spec.bands - 1);
    for (std::size_t b = 0; b < spec.bands; ++b) {
      (*wl)[b] = *spec.wavelength_min_nm + step * static_cast<double>(b);
    }
    (*wl)[spec.bands - 1] = *spec.wavelength_max_nm;
  }
  return mix_cube(spec.height, spec.width, spec.bands, abundances, signatures, spec.noise_sigma,
                  noise_rng, std::move(wl));
}

// ---------------------------------------------------------------------------
// S3RC v1 container

inline constexpr char kCubeMagic[4] = {'S', '3', 'R', 'C'};
inline constexpr std::uint32_t kCubeVersion = 1;
inline constexpr std::uint32_t kMaskVersion = 2;

// Header shared by the cube (v1, f32 payload) and mask dump (v2, u8 payload).
inline void write_container_header(io::ByteWriter& w, std::uint32_t version, std::size_t height,
                                   std::size_t width, std::size_t bands,
                                   const std::optional<std::vector<double>>& wavelengths) {
  w.text(std::string_view(kCubeMagic, 4));
  w.u32(version);
  w.u32(static_cast<std::uint32_t>(height));
  w.u32(static_cast<std::uint32_t>(width));
  w.u32(static_cast<std::uint32_t>(bands));
  w.u8(wavelengths ? 1 : 0);
  if (wavelengths) {
    for (double v : *wavelengths) w.f64(v);
  }
}

struct ContainerHeader {
  std::uint32_t version = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t bands = 0;
  std::optional<std::vector<double>> wavelengths;
};

inline ContainerHeader read_container_header(io::ByteReader& r, std::uint32_t expected_version) {
  if (r.remaining() < 4 || r.text(4) != std::string_view(kCubeMagic, 4)) {
    fail(ErrorKind::BadMagic, "bad magic: not an S3RC container");
  }
  ContainerHeader h;
  h.version = r.u32();
  if (h.version != expected_version) {
    fail(ErrorKind::UnsupportedVersion, "unsupported S3RC version " + std::to_string(h.version) +
                                            " (expected " + std::to_string(expected_version) + ")");
  }
  h.height = r.u32();
  h.width = r.u32();
  h.bands = r.u32();
  const std::uint8_t has_wl = r.u8();
  if (has_wl > 1) fail(ErrorKind::InvariantViolation, "has_wavelengths flag must be 0 or 1");
  if (has_wl == 1) {
    std::vector<double> wl(h.bands);
    for (auto& v : wl) v = r.f64();
    h.wavelengths = std::move(wl);
  }
  return h;
}

inline std::vector<std::uint8_t> encode_cube(const HsiCube& cube) {
  io::ByteWriter w;
  write_container_header(w, kCubeVersion, cube.height(), cube.width(), cube.bands(),
                         cube.wavelengths_nm());
  for (double v : cube.data()) w.f32(static_cast<float>(v));
  return w.take();
}

inline HsiCube decode_cube(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  auto h = read_container_header(r, kCubeVersion);
  if (h.bands < 2) {
    fail(ErrorKind::InvariantViolation, "cube needs bands >= 2, got " + std::to_string(h.bands));
  }
  if (h.height < 1 || h.width < 1) {
    fail(ErrorKind::InvariantViolation, "cube needs height >= 1 and width >= 1");
  }
  const std::uint64_t count = static_cast<std::uint64_t>(h.height) * h.width * h.bands;
  if (count * 4 > r.remaining()) {
    fail(ErrorKind::Truncated, "truncated payload: expected " + std::to_string(count * 4) +
                                   " bytes, have " + std::to_string(r.remaining()));
  }
  std::vector<double> data(count);
  for (auto& v : data) v = static_cast<double>(r.f32());
  if (r.remaining() != 0) {
    fail(ErrorKind::InvariantViolation,
         std::to_string(r.remaining()) + " trailing bytes after cube payload");
  }
  return HsiCube(h.height, h.width, h.bands, std::move(data), std::move(h.wavelengths));
}

inline HsiCube read_cube(const std::filesystem::path& path) { return decode_cube(io::read_file(path)); }

inline void write_cube(const HsiCube& cube, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_cube(cube));
}

// Rounds every intensity to f32, i.e. the value a write/read cycle returns.
inline HsiCube quantize_f32(const HsiCube& cube) {
  std::vector<double> data(cube.data().begin(), cube.data().end());
  for (double& v : data) v = static_cast<double>(static_cast<float>(v));
  return HsiCube(cube.height(), cube.width(), cube.bands(), std::move(data), cube.wavelengths_nm());
}

}  // namespace specreg
