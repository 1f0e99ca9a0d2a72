#include "deunet/phantom.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "deunet/params.hpp"

namespace deunet {

int PhantomSpec::subjects() const {
  if (timestamps < 1 || total_clips() % timestamps != 0)
    throw std::invalid_argument("phantom: total clips must be divisible by timestamps");
  return total_clips() / timestamps;
}

void PhantomSpec::validate() const {
  if (size < 16) throw std::invalid_argument("phantom: size must be >= 16");
  if (r < 0) throw std::invalid_argument("phantom: r must be >= 0");
  if (2 * r + 1 > timestamps)
    throw std::invalid_argument("phantom: clip length exceeds cycle length");
  if (noise_sigma < 0 || motion_amp < 0 || motion_amp >= 0.5)
    throw std::invalid_argument("phantom: bad noise/motion settings");
  (void)subjects();
}

namespace {

struct SubjectGeometry {
  double cx, cy;          // heart center
  double lv_r0;           // base LV radius
  double myo_th;          // ring thickness
  double rv_r;            // RV lobe radius
  double rv_angle;        // direction of the RV lobe from the center
  double axis_ratio;      // mild ellipticity
  double phase0;          // cycle phase offset
  double i_bg, i_rv, i_myo, i_lv;
};

SubjectGeometry draw_geometry(const PhantomSpec& spec, Rng& rng) {
  const double s = spec.size;
  SubjectGeometry g;
  g.cx = 0.5 * s + rng.uniform(-s / 12.0, s / 12.0);
  g.cy = 0.5 * s + rng.uniform(-s / 12.0, s / 12.0);
  g.lv_r0 = s * rng.uniform(spec.lv_radius_min, spec.lv_radius_max);
  g.myo_th = s * rng.uniform(spec.myo_thickness_min, spec.myo_thickness_max);
  g.rv_r = s * rng.uniform(spec.rv_radius_min, spec.rv_radius_max);
  g.rv_angle = rng.uniform(0.65, 1.35) * std::numbers::pi;  // left side of the heart
  g.axis_ratio = rng.uniform(0.85, 1.0);
  g.phase0 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  g.i_bg = 0.12 + rng.uniform(-0.03, 0.03);
  g.i_rv = 0.62 + rng.uniform(-0.04, 0.04);
  g.i_myo = 0.34 + rng.uniform(-0.04, 0.04);
  g.i_lv = 0.86 + rng.uniform(-0.04, 0.04);
  return g;
}

struct FramePaint {
  SegmentationMask mask;
  Tensor image;  // [H,W] noiseless
};

FramePaint paint_timestamp(const PhantomSpec& spec, const SubjectGeometry& g, int t) {
  const int n = spec.size;
  const double cycle =
      std::sin(2.0 * std::numbers::pi * t / spec.timestamps + g.phase0);
  const double sc = 1.0 + spec.motion_amp * cycle;
  const double lv_r = g.lv_r0 * sc;
  const double myo_out = lv_r + g.myo_th;
  const double rv_d = myo_out + 0.35 * g.rv_r;  // lobe center distance
  const double rvx = g.cx + rv_d * std::cos(g.rv_angle);
  const double rvy = g.cy + rv_d * std::sin(g.rv_angle);
  const double rv_r = g.rv_r * (1.0 + 0.5 * spec.motion_amp * cycle);

  FramePaint fp{SegmentationMask(n, n, spec.spacing), Tensor({n, n})};
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double dx = (x - g.cx) / g.axis_ratio;
      const double dy = y - g.cy;
      const double d_heart = std::sqrt(dx * dx + dy * dy);
      const double drx = x - rvx;
      const double dry = y - rvy;
      const double d_rv = std::sqrt(drx * drx + dry * dry);
      std::uint8_t label = 0;
      double intensity = g.i_bg;
      if (d_heart <= lv_r) {
        label = 3;
        intensity = g.i_lv;
      } else if (d_heart <= myo_out) {
        label = 2;
        intensity = g.i_myo;
      } else if (d_rv <= rv_r) {
        label = 1;  // crescent: RV lobe minus the ring it hugs
        intensity = g.i_rv;
      }
      fp.mask.at(y, x) = label;
      fp.image.at(y, x) = intensity;
    }
  }
  return fp;
}

}  // namespace

Dataset generate_phantom(const PhantomSpec& spec, std::uint64_t seed) {
  spec.validate();
  const int n_sub = spec.subjects();
  const int T = 2 * spec.r + 1;
  Rng root(seed);
  Dataset ds;
  ds.samples.reserve(static_cast<size_t>(spec.total_clips()));

  for (int s = 0; s < n_sub; ++s) {
    Rng srng = root.fork(static_cast<std::uint64_t>(s));
    const SubjectGeometry geo = draw_geometry(spec, srng);

    std::vector<FramePaint> frames;
    std::vector<Tensor> noisy(static_cast<size_t>(spec.timestamps));
    frames.reserve(static_cast<size_t>(spec.timestamps));
    double best_area = -1.0, worst_area = 1e18;
    int ed_t = 0, es_t = 0;
    for (int t = 0; t < spec.timestamps; ++t) {
      frames.push_back(paint_timestamp(spec, geo, t));
      Rng nrng = srng.fork(0x4015E000u + static_cast<std::uint64_t>(t));
      Tensor img = frames.back().image;
      for (double& v : img.data) v = snap_f32(v + spec.noise_sigma * nrng.normal());
      noisy[static_cast<size_t>(t)] = std::move(img);
      double area = 0.0;
      for (std::uint8_t l : frames.back().mask.labels) area += l == 3;
      if (area > best_area) {
        best_area = area;
        ed_t = t;  // most expanded cavity
      }
      if (area < worst_area) {
        worst_area = area;
        es_t = t;  // most contracted
      }
    }

    for (int t0 = 0; t0 < spec.timestamps; ++t0) {
      ClipSample sample;
      sample.subject = static_cast<std::uint32_t>(s);
      sample.timestamp = static_cast<std::uint32_t>(t0);
      sample.phase = t0 == ed_t ? Phase::ed : t0 == es_t ? Phase::es : Phase::other;
      sample.spacing = static_cast<float>(spec.spacing);
      sample.clip = Tensor({T, spec.size, spec.size});
      for (int k = -spec.r; k <= spec.r; ++k) {
        int t = t0 + k;
        if (spec.cyclic) {
          t = ((t % spec.timestamps) + spec.timestamps) % spec.timestamps;
        } else {
          t = std::clamp(t, 0, spec.timestamps - 1);
        }
        const Tensor& src = noisy[static_cast<size_t>(t)];
        std::copy(src.data.begin(), src.data.end(),
                  sample.clip.data.begin() +
                      static_cast<std::int64_t>(k + spec.r) * spec.size * spec.size);
      }
      sample.mask = frames[static_cast<size_t>(t0)].mask;
      ds.samples.push_back(std::move(sample));
    }
  }
  return ds;
}

}  // namespace deunet
