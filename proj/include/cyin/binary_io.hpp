#pragma once

// Little-endian byte encoding shared by the dataset and checkpoint formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "cyin/errors.hpp"

namespace cyin::io {

class ByteWriter {
 public:
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

  template <typename T>
  void uint(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i)
      buf_.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
  }

  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }

  const std::vector<char>& data() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class ByteReader {
 public:
  ByteReader(const char* data, std::size_t size, std::string what)
      : data_(data), size_(size), what_(std::move(what)) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return size_ - pos_; }

  /// Throws ParseError stating expected vs actual byte count.
  void need(std::size_t n, std::string_view field) const {
    if (remaining() < n) {
      throw ParseError(what_ + ": truncated while reading " + std::string(field) +
                       " at offset " + std::to_string(pos_) + ": expected " +
                       std::to_string(n) + " bytes, got " + std::to_string(remaining()));
    }
  }

  std::string bytes(std::size_t n, std::string_view field) {
    need(n, field);
    std::string s(data_ + pos_, n);
    pos_ += n;
    return s;
  }

  template <typename T>
  T uint(std::string_view field) {
    need(sizeof(T), field);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  float f32(std::string_view field) { return std::bit_cast<float>(uint<std::uint32_t>(field)); }
  double f64(std::string_view field) { return std::bit_cast<double>(uint<std::uint64_t>(field)); }

 private:
  const char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
  std::string what_;
};

std::vector<char> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<char>& bytes);

}  // namespace cyin::io
