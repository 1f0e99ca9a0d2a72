#include "deunet/export.hpp"

#include <zlib.h>

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "deunet/binio.hpp"

namespace deunet {

namespace {

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4],
               const std::vector<std::uint8_t>& payload) {
  put_u32_be(out, static_cast<std::uint32_t>(payload.size()));
  const size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  const auto crc = crc32(0L, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
  put_u32_be(out, static_cast<std::uint32_t>(crc));
}

// label -> RGB: background black, RV red, MYO green, LV blue
constexpr std::uint8_t kPalette[4][3] = {{0, 0, 0}, {220, 40, 40}, {40, 200, 70}, {50, 90, 230}};

}  // namespace

void write_mask_png(const std::string& path, const SegmentationMask& mask) {
  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<size_t>(mask.h) * (1 + 3 * static_cast<size_t>(mask.w)));
  for (int y = 0; y < mask.h; ++y) {
    raw.push_back(0);  // filter: none
    for (int x = 0; x < mask.w; ++x) {
      const std::uint8_t l = mask.at(y, x);
      raw.push_back(kPalette[l][0]);
      raw.push_back(kPalette[l][1]);
      raw.push_back(kPalette[l][2]);
    }
  }
  uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> comp(comp_len);
  if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw std::runtime_error("png: zlib compression failed");
  comp.resize(comp_len);

  std::vector<std::uint8_t> png = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  std::vector<std::uint8_t> ihdr;
  put_u32_be(ihdr, static_cast<std::uint32_t>(mask.w));
  put_u32_be(ihdr, static_cast<std::uint32_t>(mask.h));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // color type: truecolor
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // interlace
  put_chunk(png, "IHDR", ihdr);
  put_chunk(png, "IDAT", comp);
  put_chunk(png, "IEND", {});
  atomic_write_file(path, png);
}

void write_mask_csv(const std::string& path, const SegmentationMask& mask) {
  std::ostringstream os;
  for (int y = 0; y < mask.h; ++y) {
    for (int x = 0; x < mask.w; ++x) {
      if (x) os << ',';
      os << static_cast<int>(mask.at(y, x));
    }
    os << '\n';
  }
  atomic_write_file(path, os.str());
}

SegmentationMask read_mask_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open mask csv: " + path);
  std::vector<std::vector<std::uint8_t>> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::uint8_t> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      const int v = std::stoi(cell);
      if (v < 0 || v >= kNumClasses)
        throw std::runtime_error("mask csv: label out of range in " + path);
      row.push_back(static_cast<std::uint8_t>(v));
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("mask csv: ragged rows in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("mask csv: empty file " + path);
  SegmentationMask mask(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (int y = 0; y < mask.h; ++y)
    for (int x = 0; x < mask.w; ++x) mask.at(y, x) = rows[static_cast<size_t>(y)][static_cast<size_t>(x)];
  return mask;
}

}  // namespace deunet
