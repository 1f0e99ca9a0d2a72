#include "deunet/archive.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "deunet/binio.hpp"

namespace deunet {

static constexpr char kArchiveMagic[8] = {'D', 'S', 'E', 'G', '0', '0', '0', '1'};

std::vector<std::uint8_t> encode_archive(const Dataset& ds) {
  std::set<std::uint32_t> subjects;
  for (const auto& s : ds.samples) subjects.insert(s.subject);
  ByteWriter w;
  w.bytes(kArchiveMagic, sizeof(kArchiveMagic));
  w.u32(static_cast<std::uint32_t>(subjects.size()));
  w.u32(static_cast<std::uint32_t>(ds.samples.size()));
  for (const auto& s : ds.samples) {
    if (s.clip.rank() != 3) throw std::invalid_argument("archive: clip must be [T,H,W]");
    if (s.mask.h != s.clip.dim(1) || s.mask.w != s.clip.dim(2))
      throw std::invalid_argument("archive: mask shape does not match clip frames");
    if (!s.mask.labels_valid()) throw std::invalid_argument("archive: labels out of range");
    w.u32(s.subject);
    w.u32(s.timestamp);
    w.u8(static_cast<std::uint8_t>(s.phase));
    w.f32(s.spacing);
    w.u32(static_cast<std::uint32_t>(s.clip.dim(0)));
    w.u32(static_cast<std::uint32_t>(s.clip.dim(1)));
    w.u32(static_cast<std::uint32_t>(s.clip.dim(2)));
    for (double v : s.clip.data) w.f32(static_cast<float>(v));
    w.bytes(s.mask.labels.data(), s.mask.labels.size());
  }
  return w.buffer();
}

void save_archive(const std::string& path, const Dataset& ds) {
  atomic_write_file(path, encode_archive(ds));
}

Dataset decode_archive(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes.data(), bytes.size());
  if (r.str(sizeof(kArchiveMagic)) != std::string(kArchiveMagic, sizeof(kArchiveMagic)))
    r.fail("bad archive magic");
  const std::uint32_t n_subjects = r.u32();
  const std::uint32_t n_clips = r.u32();
  if (n_clips > 1u << 24) r.fail("implausible clip count");

  Dataset ds;
  ds.samples.reserve(n_clips);
  std::set<std::uint32_t> subjects;
  for (std::uint32_t i = 0; i < n_clips; ++i) {
    ClipSample s;
    s.subject = r.u32();
    s.timestamp = r.u32();
    const std::uint8_t phase = r.u8();
    if (phase > 2) r.fail("invalid phase tag");
    s.phase = static_cast<Phase>(phase);
    s.spacing = r.f32();
    if (!(s.spacing > 0.0f) || !std::isfinite(s.spacing)) r.fail("invalid spacing");
    const std::uint32_t t = r.u32();
    const std::uint32_t h = r.u32();
    const std::uint32_t w = r.u32();
    if (t == 0 || t % 2 == 0 || t > 63) r.fail("clip length must be odd and small");
    if (h == 0 || w == 0 || h > 4096 || w > 4096) r.fail("implausible frame size");
    const std::uint64_t frame_bytes = static_cast<std::uint64_t>(t) * h * w * 4;
    const std::uint64_t mask_bytes = static_cast<std::uint64_t>(h) * w;
    if (frame_bytes + mask_bytes > r.remaining()) r.fail("clip payload exceeds file size");
    s.clip = Tensor({static_cast<int>(t), static_cast<int>(h), static_cast<int>(w)});
    for (double& v : s.clip.data) v = static_cast<double>(r.f32());
    s.mask = SegmentationMask(static_cast<int>(h), static_cast<int>(w),
                              static_cast<double>(s.spacing));
    r.raw(s.mask.labels.data(), s.mask.labels.size());
    if (!s.mask.labels_valid()) r.fail("mask labels outside {0,1,2,3}");
    subjects.insert(s.subject);
    ds.samples.push_back(std::move(s));
  }
  if (!r.at_end()) r.fail("trailing bytes after declared clips");
  if (subjects.size() != n_subjects) r.fail("declared subject count does not match payload");
  return ds;
}

Dataset load_archive(const std::string& path, int resize_to) {
  Dataset ds = decode_archive(read_file(path));
  if (resize_to <= 0) return ds;
  for (auto& s : ds.samples) {
    if (s.clip.dim(1) == resize_to && s.clip.dim(2) == resize_to) continue;
    const int t = s.clip.dim(0), h = s.clip.dim(1), w = s.clip.dim(2);
    Tensor out({t, resize_to, resize_to});
    for (int f = 0; f < t; ++f) {
      Tensor plane({h, w});
      std::copy_n(s.clip.data.begin() + static_cast<std::int64_t>(f) * h * w,
                  static_cast<std::int64_t>(h) * w, plane.data.begin());
      Tensor rp = resize_bilinear(plane, resize_to, resize_to);
      std::copy(rp.data.begin(), rp.data.end(),
                out.data.begin() + static_cast<std::int64_t>(f) * resize_to * resize_to);
    }
    s.clip = std::move(out);
    s.mask = resize_nearest(s.mask, resize_to, resize_to);
  }
  return ds;
}

Tensor resize_bilinear(const Tensor& plane, int oh, int ow) {
  if (plane.rank() != 2) throw std::invalid_argument("resize_bilinear: plane must be [H,W]");
  const int h = plane.dim(0), w = plane.dim(1);
  Tensor out({oh, ow});
  const double sy = static_cast<double>(h) / oh;
  const double sx = static_cast<double>(w) / ow;
  for (int y = 0; y < oh; ++y) {
    // center-aligned source coordinates, clamped to the valid square
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - y0;
    for (int x = 0; x < ow; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - x0;
      out.at(y, x) = (1 - wy) * ((1 - wx) * plane.at(y0, x0) + wx * plane.at(y0, x1)) +
                     wy * ((1 - wx) * plane.at(y1, x0) + wx * plane.at(y1, x1));
    }
  }
  return out;
}

SegmentationMask resize_nearest(const SegmentationMask& mask, int oh, int ow) {
  SegmentationMask out(oh, ow, mask.spacing);
  const double sy = static_cast<double>(mask.h) / oh;
  const double sx = static_cast<double>(mask.w) / ow;
  for (int y = 0; y < oh; ++y) {
    const int syi = std::min(mask.h - 1, static_cast<int>((y + 0.5) * sy));
    for (int x = 0; x < ow; ++x) {
      const int sxi = std::min(mask.w - 1, static_cast<int>((x + 0.5) * sx));
      out.at(y, x) = mask.at(syi, sxi);
    }
  }
  return out;
}

}  // namespace deunet
