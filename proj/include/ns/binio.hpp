#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "ns/common.hpp"

namespace ns {

/// Little-endian byte buffer writer for the NSF1/NSM1/NSP1/NSC1 formats.
class ByteWriter {
 public:
  void magic(const char m[4]) { buf_.append(m, 4); }

  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }

  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }

  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }

  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    u32(bits);
  }

  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    u64(bits);
  }

  void raw(const void* data, std::size_t n) {
    buf_.append(static_cast<const char*>(data), n);
  }

  void reserve(std::size_t n) { buf_.reserve(n); }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageError("cannot open file for writing: " + path.string());
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw StorageError("write failed: " + path.string());
  }

  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

/// Streaming little-endian reader; throws FormatError naming the byte offset
/// on truncation or magic mismatch.
class ByteReader {
 public:
  explicit ByteReader(const std::filesystem::path& path)
      : path_(path.string()), in_(path, std::ios::binary) {
    if (!in_) throw StorageError("cannot open file: " + path_);
  }

  void expect_magic(const char magic[4]) {
    char buf[4];
    read(buf, 4);
    if (std::memcmp(buf, magic, 4) != 0) throw FormatError("bad magic at offset 0 in " + path_);
  }

  std::uint8_t u8() {
    unsigned char b;
    read(&b, 1);
    return b;
  }

  std::uint32_t u32() {
    unsigned char b[4];
    read(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }

  std::uint64_t u64() {
    unsigned char b[8];
    read(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }

  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }

  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }

  void read(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      throw FormatError("truncated file at offset " +
                        std::to_string(offset_ + static_cast<std::size_t>(in_.gcount())) + ": " +
                        path_);
    offset_ += n;
  }

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t offset_ = 0;
};

}  // namespace ns
