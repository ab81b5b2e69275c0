#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "specreg/error.hpp"
#include "specreg/io.hpp"
#include "specreg/nnet.hpp"

namespace specreg {

// S3RW v1, little-endian:
//   "S3RW" | u32 version=1
//   u32 in_planes | u32 stem_channels | u32 num_stages | u32 head_hidden | u32 out_dim
//   u32 block_count, then per block: u32 name_len | name | u64 count | count x f32
//   u32 CRC-32 of every preceding byte
inline constexpr char kWeightsMagic[4] = {'S', '3', 'R', 'W'};
inline constexpr std::uint32_t kWeightsVersion = 1;

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

inline std::vector<std::uint8_t> encode_checkpoint(const nn::Encoder& encoder) {
  io::ByteWriter w;
  w.text(std::string_view(kWeightsMagic, 4));
  w.u32(kWeightsVersion);
  const auto& c = encoder.config();
  for (std::size_t v : {c.in_planes, c.stem_channels, c.num_stages, c.head_hidden, c.out_dim}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  const auto params = encoder.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.u32(static_cast<std::uint32_t>(p.name.size()));
    w.text(p.name);
    w.u64(p.size());
    for (double v : p.value) w.f32(static_cast<float>(v));
  }
  w.u32(crc32_of(w.buffer()));
  return w.take();
}

inline nn::Encoder decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::string_view(reinterpret_cast<const char*>(bytes.data()), 4) !=
                              std::string_view(kWeightsMagic, 4)) {
    fail(ErrorKind::BadMagic, "bad magic: not an S3RW checkpoint");
  }
  if (bytes.size() < 12) fail(ErrorKind::Truncated, "truncated checkpoint");
  const auto body = bytes.first(bytes.size() - 4);
  io::ByteReader tail(bytes.last(4));
  if (tail.u32() != crc32_of(body)) {
    fail(ErrorKind::Checksum, "checkpoint CRC mismatch (file corrupted or truncated)");
  }
  io::ByteReader r(body);
  r.bytes(4);
  const std::uint32_t version = r.u32();
  if (version != kWeightsVersion) {
    fail(ErrorKind::UnsupportedVersion, "unsupported S3RW version " + std::to_string(version));
  }
  nn::EncoderConfig cfg;
  cfg.in_planes = r.u32();
  cfg.stem_channels = r.u32();
  cfg.num_stages = r.u32();
  cfg.head_hidden = r.u32();
  cfg.out_dim = r.u32();
  try {
    cfg.validate();
  } catch (const Error& e) {
    fail(ErrorKind::InvariantViolation, std::string("checkpoint config: ") + e.what());
  }
  auto enc = nn::Encoder::zeros(cfg);
  const std::uint32_t blocks = r.u32();
  if (blocks != enc.parameters().size()) {
    fail(ErrorKind::InvariantViolation, "checkpoint has " + std::to_string(blocks) +
                                            " parameter blocks, expected " +
                                            std::to_string(enc.parameters().size()));
  }
  for (auto& p : enc.parameters()) {
    const std::string name = r.text(r.u32());
    if (name != p.name) {
      fail(ErrorKind::InvariantViolation, "checkpoint block '" + name + "' where '" + p.name +
                                              "' was expected");
    }
    const std::uint64_t count = r.u64();
    if (count != p.size()) {
      fail(ErrorKind::InvariantViolation, "checkpoint block '" + name + "' has " +
                                              std::to_string(count) + " elements, expected " +
                                              std::to_string(p.size()));
    }
    for (double& v : p.value) {
      v = static_cast<double>(r.f32());
      if (!std::isfinite(v)) fail(ErrorKind::InvariantViolation, "non-finite weight in " + name);
    }
  }
  if (r.remaining() != 0) fail(ErrorKind::InvariantViolation, "trailing bytes in checkpoint");
  return enc;
}

inline void write_checkpoint(const nn::Encoder& encoder, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_checkpoint(encoder));
}

inline nn::Encoder read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path));
}

// Short provenance tag: the checkpoint's CRC-32 trailer as 8 hex digits.
inline std::string checkpoint_hash(const nn::Encoder& encoder) {
  const auto bytes = encode_checkpoint(encoder);
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", crc32_of(std::span(bytes).first(bytes.size() - 4)));
  return buf;
}

}  // namespace specreg
