#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "specreg/cube.hpp"
#include "specreg/error.hpp"
#include "specreg/io.hpp"
#include "specreg/rng.hpp"

namespace specreg {

inline constexpr double kDefaultMaskRatio = 0.65;

struct MaskSpec {
  // Edge of the square patches; 0 selects min(H, W) / 8 at sampling time.
  std::size_t patch_size = 0;
  double target_ratio = kDefaultMaskRatio;
  std::uint64_t seed = 0;
  double fill_value = 0.0;

  std::size_t resolved_patch(std::size_t height, std::size_t width) const {
    if (patch_size != 0) return patch_size;
    return std::max<std::size_t>(1, std::min(height, width) / 8);
  }

  void validate(std::size_t height, std::size_t width) const {
    require(std::isfinite(target_ratio) && target_ratio > 0.0 && target_ratio < 1.0,
            "mask target_ratio must lie in (0, 1)");
    require(std::isfinite(fill_value), "mask fill_value must be finite");
    const std::size_t p = resolved_patch(height, width);
    require(p >= 1 && p <= std::min(height, width),
            "mask patch_size " + std::to_string(p) + " must be in [1, min(H, W) = " +
                std::to_string(std::min(height, width)) + "]");
  }
};

// Occlusion flags, shape planes x H x W, plane-major; 1 = masked.
struct MaskTensor {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t planes = 0;
  std::vector<std::uint8_t> flags;

  std::size_t plane_pixels() const noexcept { return height * width; }
  std::span<const std::uint8_t> plane(std::size_t p) const {
    return std::span<const std::uint8_t>(flags).subspan(p * plane_pixels(), plane_pixels());
  }
  bool operator==(const MaskTensor&) const = default;
};

// Patch cells of a plane, enumerated row-major over the patch grid. Edge cells
// are clipped when the patch size does not divide H or W.
struct PatchGrid {
  std::size_t patch = 1;
  std::size_t rows = 0;
  std::size_t cols = 0;

  PatchGrid(std::size_t height, std::size_t width, std::size_t patch_size)
      : patch(patch_size),
        rows((height + patch_size - 1) / patch_size),
        cols((width + patch_size - 1) / patch_size) {}

  std::size_t cells() const noexcept { return rows * cols; }
};

// Masks one plane: visits patch cells in a uniformly random order and stops as
// soon as the masked fraction reaches the target. Returns the chosen cells in
// selection order.
inline std::vector<std::size_t> sample_plane(std::span<std::uint8_t> plane, std::size_t height,
                                             std::size_t width, const PatchGrid& grid,
                                             double target_ratio, Rng& rng) {
  std::vector<std::size_t> order(grid.cells());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span(order));
  const double threshold = target_ratio * static_cast<double>(height * width);
  std::size_t masked = 0;
  std::vector<std::size_t> chosen;
  for (std::size_t cell : order) {
    if (static_cast<double>(masked) >= threshold) break;
    const std::size_t y0 = (cell / grid.cols) * grid.patch;
    const std::size_t x0 = (cell % grid.cols) * grid.patch;
    for (std::size_t y = y0; y < std::min(y0 + grid.patch, height); ++y) {
      for (std::size_t x = x0; x < std::min(x0 + grid.patch, width); ++x) {
        plane[y * width + x] = 1;
        ++masked;
      }
    }
    chosen.push_back(cell);
  }
  return chosen;
}

// Each plane draws from its own counter-derived stream, so planes are
// independent and can be generated in any order.
inline MaskTensor sample_mask(const MaskSpec& spec, std::size_t height, std::size_t width,
                              std::size_t planes) {
  require(height >= 1 && width >= 1, "mask dimensions must be >= 1");
  require(planes >= 1, "mask needs at least one plane");
  spec.validate(height, width);
  const PatchGrid grid(height, width, spec.resolved_patch(height, width));
  MaskTensor mask{height, width, planes, std::vector<std::uint8_t>(height * width * planes, 0)};
  for (std::size_t p = 0; p < planes; ++p) {
    Rng rng(derive_seed(spec.seed, {p}));
    auto plane = std::span(mask.flags).subspan(p * height * width, height * width);
    sample_plane(plane, height, width, grid, spec.target_ratio, rng);
  }
  return mask;
}

inline BandStack apply_mask(const BandStack& remaining, const MaskTensor& mask, double fill_value) {
  if (mask.height != remaining.height() || mask.width != remaining.width() ||
      mask.planes != remaining.bands()) {
    fail(ErrorKind::Validation, "mask shape " + std::to_string(mask.planes) + "x" +
                                    std::to_string(mask.height) + "x" + std::to_string(mask.width) +
                                    " does not match input " + std::to_string(remaining.bands()) +
                                    "x" + std::to_string(remaining.height()) + "x" +
                                    std::to_string(remaining.width()));
  }
  std::vector<double> out(remaining.data().begin(), remaining.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (mask.flags[i]) out[i] = fill_value;
  }
  return BandStack(remaining.height(), remaining.width(), remaining.bands(), std::move(out),
                   remaining.wavelengths_nm());
}

inline std::vector<double> measured_ratio(const MaskTensor& mask) {
  std::vector<double> ratios(mask.planes);
  for (std::size_t p = 0; p < mask.planes; ++p) {
    auto plane = mask.plane(p);
    const auto count = std::count(plane.begin(), plane.end(), std::uint8_t{1});
    ratios[p] = static_cast<double>(count) / static_cast<double>(mask.plane_pixels());
  }
  return ratios;
}

// Mask dump: S3RC header with version 2, then one u8 flag per element.
inline std::vector<std::uint8_t> encode_mask(const MaskTensor& mask) {
  io::ByteWriter w;
  write_container_header(w, kMaskVersion, mask.height, mask.width, mask.planes, std::nullopt);
  w.bytes(mask.flags);
  return w.take();
}

inline MaskTensor decode_mask(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  auto h = read_container_header(r, kMaskVersion);
  if (h.wavelengths) fail(ErrorKind::InvariantViolation, "mask dumps carry no wavelengths");
  const std::uint64_t count = static_cast<std::uint64_t>(h.height) * h.width * h.bands;
  if (count > r.remaining()) fail(ErrorKind::Truncated, "truncated mask payload");
  auto payload = r.bytes(count);
  if (r.remaining() != 0) fail(ErrorKind::InvariantViolation, "trailing bytes after mask payload");
  MaskTensor mask{h.height, h.width, h.bands, std::vector<std::uint8_t>(payload.begin(), payload.end())};
  for (auto f : mask.flags) {
    if (f > 1) fail(ErrorKind::InvariantViolation, "mask flags must be 0 or 1");
  }
  return mask;
}

inline void write_mask(const MaskTensor& mask, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_mask(mask));
}

inline MaskTensor read_mask(const std::filesystem::path& path) {
  return decode_mask(io::read_file(path));
}

}  // namespace specreg
