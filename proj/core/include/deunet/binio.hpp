// Little-endian binary readers/writers shared by the checkpoint and clip
// archive formats. Readers are strict: any out-of-range access throws with
// the offending byte offset.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace deunet {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v);
  void f32(float v);
  void bytes(const void* p, size_t n);
  void str(const std::string& s) { bytes(s.data(), s.size()); }

  const std::vector<std::uint8_t>& buffer() const { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, size_t size) : data_(data), size_(size) {}

  std::uint8_t u8();
  std::uint32_t u32();
  float f32();
  std::string str(size_t n);
  void raw(void* out, size_t n);

  size_t offset() const { return pos_; }
  size_t remaining() const { return size_ - pos_; }
  bool at_end() const { return pos_ == size_; }
  [[noreturn]] void fail(const std::string& what) const;

 private:
  void need(size_t n) const;
  const std::uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::string& path);
// write-temp-then-rename so readers never observe a partial file
void atomic_write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);
void atomic_write_file(const std::string& path, const std::string& text);

}  // namespace deunet
