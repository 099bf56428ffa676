#pragma once

// Little-endian primitives shared by the CLEM and CLMH codecs.

#include "morallens/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace morallens::detail {

template <typename UInt>
constexpr UInt byteswap(UInt value) noexcept {
  UInt out = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    out = static_cast<UInt>((out << 8) | ((value >> (8 * i)) & 0xFF));
  }
  return out;
}

template <typename UInt>
constexpr UInt to_little(UInt value) noexcept {
  if constexpr (std::endian::native == std::endian::little) {
    return value;
  } else {
    return byteswap(value);
  }
}

class ByteWriter {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    buffer_.insert(buffer_.end(), p, p + n);
  }

  void u8(std::uint8_t v) { buffer_.push_back(v); }

  void u32(std::uint32_t v) {
    v = to_little(v);
    bytes(&v, sizeof v);
  }

  void u64(std::uint64_t v) {
    v = to_little(v);
    bytes(&v, sizeof v);
  }

  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  void f32s(std::span<const float> values) {
    if constexpr (std::endian::native == std::endian::little) {
      bytes(values.data(), values.size_bytes());
    } else {
      for (float v : values) f32(v);
    }
  }

  const std::vector<unsigned char>& buffer() const noexcept { return buffer_; }

 private:
  std::vector<unsigned char> buffer_;
};

class ByteReader {
 public:
  ByteReader(std::span<const unsigned char> data, std::string what)
      : data_(data), what_(std::move(what)) {}

  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  std::size_t position() const noexcept { return pos_; }

  void require(std::size_t n) const {
    if (remaining() < n) {
      throw Error(Errc::truncated, what_ + ": truncated at byte " + std::to_string(pos_) +
                                       " (need " + std::to_string(n) + ", have " +
                                       std::to_string(remaining()) + ")");
    }
  }

  std::span<const unsigned char> take(std::size_t n) {
    require(n);
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::uint8_t u8() { return take(1)[0]; }

  std::uint32_t u32() {
    std::uint32_t v;
    std::memcpy(&v, take(sizeof v).data(), sizeof v);
    return to_little(v);
  }

  std::uint64_t u64() {
    std::uint64_t v;
    std::memcpy(&v, take(sizeof v).data(), sizeof v);
    return to_little(v);
  }

  float f32() { return std::bit_cast<float>(u32()); }

  void f32s(std::span<float> out) {
    auto raw = take(out.size_bytes());
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out.data(), raw.data(), raw.size());
    } else {
      for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint32_t v;
        std::memcpy(&v, raw.data() + 4 * i, 4);
        out[i] = std::bit_cast<float>(byteswap(v));
      }
    }
  }

 private:
  std::span<const unsigned char> data_;
  std::size_t pos_ = 0;
  std::string what_;
};

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::vector<unsigned char> data((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::io, "read failed: " + path.string());
  return data;
}

inline void write_file_bytes(const std::filesystem::path& path,
                             std::span<const unsigned char> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot open for writing " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

}  // namespace morallens::detail
