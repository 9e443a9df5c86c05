#pragma once

// Little-endian binary helpers shared by the file containers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "binori/error.hpp"

namespace binori::detail {

class ByteWriter {
 public:
  void magic(const char (&m)[5]) { bytes_.insert(bytes_.end(), m, m + 4); }

  template <typename T>
  void put(T v) {
    if constexpr (std::is_same_v<T, double>)
      put_raw(std::bit_cast<std::uint64_t>(v), 8);
    else if constexpr (std::is_same_v<T, float>)
      put_raw(std::bit_cast<std::uint32_t>(v), 4);
    else
      put_raw(static_cast<std::uint64_t>(v), sizeof(T));
  }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    require(f.good(), ErrorCode::io, "cannot open " + path + " for writing");
    f.write(bytes_.data(), static_cast<std::streamsize>(bytes_.size()));
    require(f.good(), ErrorCode::io, "failed writing " + path);
  }

  const std::vector<char>& bytes() const { return bytes_; }

 private:
  void put_raw(std::uint64_t u, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) bytes_.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
  }
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& path) : path_(path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    require(f.good(), ErrorCode::io, "cannot open " + path);
    const auto size = static_cast<std::size_t>(f.tellg());
    f.seekg(0);
    bytes_.resize(size);
    f.read(reinterpret_cast<char*>(bytes_.data()), static_cast<std::streamsize>(size));
    require(f.good(), ErrorCode::io, "failed reading " + path);
  }

  void expect_magic(const char (&m)[5]) {
    need(4);
    require(std::memcmp(bytes_.data() + pos_, m, 4) == 0, ErrorCode::format,
            path_ + ": bad magic, expected " + std::string(m));
    pos_ += 4;
  }

  template <typename T>
  T get() {
    if constexpr (std::is_same_v<T, double>)
      return std::bit_cast<double>(get_raw(8));
    else if constexpr (std::is_same_v<T, float>)
      return std::bit_cast<float>(static_cast<std::uint32_t>(get_raw(4)));
    else
      return static_cast<T>(get_raw(sizeof(T)));
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  const std::string& path() const { return path_; }

 private:
  void need(std::size_t n) const {
    require(pos_ + n <= bytes_.size(), ErrorCode::format, path_ + ": truncated file");
  }
  std::uint64_t get_raw(std::size_t n) {
    need(n);
    std::uint64_t u = 0;
    for (std::size_t i = 0; i < n; ++i) u |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += n;
    return u;
  }

  std::string path_;
  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace binori::detail
