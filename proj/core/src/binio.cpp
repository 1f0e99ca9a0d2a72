#include "deunet/binio.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace deunet {

void ByteWriter::u32(std::uint32_t v) {
  buf_.push_back(static_cast<std::uint8_t>(v & 0xFF));
  buf_.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
  buf_.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
  buf_.push_back(static_cast<std::uint8_t>((v >> 24) & 0xFF));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::bytes(const void* p, size_t n) {
  const auto* b = static_cast<const std::uint8_t*>(p);
  buf_.insert(buf_.end(), b, b + n);
}

void ByteReader::need(size_t n) const {
  if (pos_ + n > size_)
    throw std::runtime_error("truncated input: need " + std::to_string(n) +
                             " bytes at byte offset " + std::to_string(pos_) + " of " +
                             std::to_string(size_));
}

void ByteReader::fail(const std::string& what) const {
  throw std::runtime_error(what + " at byte offset " + std::to_string(pos_));
}

std::uint8_t ByteReader::u8() {
  need(1);
  return data_[pos_++];
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = static_cast<std::uint32_t>(data_[pos_]) |
                    (static_cast<std::uint32_t>(data_[pos_ + 1]) << 8) |
                    (static_cast<std::uint32_t>(data_[pos_ + 2]) << 16) |
                    (static_cast<std::uint32_t>(data_[pos_ + 3]) << 24);
  pos_ += 4;
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

std::string ByteReader::str(size_t n) {
  need(n);
  std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
  pos_ += n;
  return s;
}

void ByteReader::raw(void* out, size_t n) {
  need(n);
  std::memcpy(out, data_ + pos_, n);
  pos_ += n;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open file: " + path);
  f.seekg(0, std::ios::end);
  const auto size = static_cast<size_t>(f.tellg());
  f.seekg(0);
  std::vector<std::uint8_t> buf(size);
  if (size > 0) f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));
  if (!f) throw std::runtime_error("failed reading file: " + path);
  return buf;
}

namespace {
void write_then_rename(const std::string& path, const void* data, size_t n) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open file for writing: " + tmp);
    if (n > 0) f.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!f) throw std::runtime_error("failed writing file: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("failed renaming " + tmp + " to " + path);
}
}  // namespace

void atomic_write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  write_then_rename(path, bytes.data(), bytes.size());
}

void atomic_write_file(const std::string& path, const std::string& text) {
  write_then_rename(path, text.data(), text.size());
}

}  // namespace deunet
