#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "caps/core.hpp"

namespace caps {

/// FNV-1a 64-bit, streamable. Used for payload checksums and cache keys.
class Fnv1a64 {
 public:
  void update(const void* data, size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < size; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001b3ULL;
    }
  }
  template <typename T>
  void update_value(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    update(&v, sizeof(T));
  }
  uint64_t digest() const { return hash_; }

 private:
  uint64_t hash_ = 0xcbf29ce484222325ULL;
};

// Little-endian framed binary writer/reader. The host is little-endian on
// every supported target; raw copies keep the loaders on the same fast path
// as the fvecs readers.

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path)
      : out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open for write: " + path);
    path_ = path;
  }

  void write_bytes(const void* data, size_t size) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out_) throw IoError("write failed: " + path_);
    written_ += size;
  }

  template <typename T>
  void write_value(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    write_bytes(&v, sizeof(T));
  }

  template <typename T>
  void write_array(std::span<const T> values) {
    static_assert(std::is_trivially_copyable_v<T>);
    write_bytes(values.data(), values.size() * sizeof(T));
  }

  uint64_t bytes_written() const { return written_; }

  void seek(uint64_t pos) {
    out_.seekp(static_cast<std::streamoff>(pos));
    if (!out_) throw IoError("seek failed: " + path_);
  }

 private:
  std::ofstream out_;
  std::string path_;
  uint64_t written_ = 0;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open for read: " + path);
    path_ = path;
    in_.seekg(0, std::ios::end);
    size_ = static_cast<uint64_t>(in_.tellg());
    in_.seekg(0);
  }

  uint64_t file_size() const { return size_; }
  uint64_t remaining() const { return size_ - pos_; }

  void read_bytes(void* data, size_t size) {
    if (size > remaining())
      throw IoError("truncated file: " + path_ + " (need " +
                    std::to_string(size) + " bytes, have " +
                    std::to_string(remaining()) + ")");
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
    if (!in_) throw IoError("read failed: " + path_);
    pos_ += size;
  }

  template <typename T>
  T read_value() {
    static_assert(std::is_trivially_copyable_v<T>);
    T v;
    read_bytes(&v, sizeof(T));
    return v;
  }

  template <typename T>
  std::vector<T> read_array(size_t count) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::vector<T> v(count);
    if (count > 0) read_bytes(v.data(), count * sizeof(T));
    return v;
  }

 private:
  std::ifstream in_;
  std::string path_;
  uint64_t size_ = 0;
  uint64_t pos_ = 0;
};

}  // namespace caps
