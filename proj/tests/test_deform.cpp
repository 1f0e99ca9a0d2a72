#include <doctest.h>

#include <stdexcept>

#include "deunet/deform.hpp"
#include "deunet/gradcheck.hpp"
#include "deunet/oracles.hpp"
#include "deunet/ops.hpp"

using namespace deunet;

namespace {
Tensor rand_t(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  fill_uniform(t, rng, lo, hi);
  return t;
}

Tensor off_lattice_offsets(std::vector<int> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = (rng.uniform_int(4) - 2) + rng.uniform(0.15, 0.85);
  return t;
}
}  // namespace

TEST_CASE("bilinear_sample: lattice points, midpoints, outside support") {
  Rng rng(1);
  Tensor f = rand_t({4, 5}, rng);
  CHECK(bilinear_sample(f, 2.0, 3.0) == f.at(2, 3));
  CHECK(bilinear_sample(f, 0.0, 0.0) == f.at(0, 0));

  Tensor two({1, 2});
  two.at(0, 0) = 0.0;
  two.at(0, 1) = 1.0;
  CHECK(bilinear_sample(two, 0.0, 0.5) == doctest::Approx(0.5).epsilon(1e-15));

  CHECK(bilinear_sample(f, -5.0, -5.0) == 0.0);
  CHECK(bilinear_sample(f, 100.0, 2.0) == 0.0);
  // fade band: value ramps linearly to zero across the border pixel
  CHECK(bilinear_sample(f, -0.5, 1.0) == doctest::Approx(0.5 * f.at(0, 1)).epsilon(1e-14));
  CHECK(bilinear_sample(f, 3.5, 1.0) == doctest::Approx(0.5 * f.at(3, 1)).epsilon(1e-14));
}

TEST_CASE("bilinear_sample: matches the longhand oracle everywhere") {
  Rng rng(2);
  Tensor f = rand_t({6, 6}, rng);
  for (int i = 0; i < 500; ++i) {
    const double y = rng.uniform(-2.5, 8.5);
    const double x = rng.uniform(-2.5, 8.5);
    CHECK(bilinear_sample(f, y, x) == doctest::Approx(oracle::bilinear_direct(f, y, x))
                                          .epsilon(1e-14));
  }
}

TEST_CASE("bilinear_sample backward: scatters the four tap weights") {
  Tensor f({3, 3});
  f.at(1, 1) = 2.0;
  f.at(1, 2) = 4.0;
  f.at(2, 1) = 6.0;
  f.at(2, 2) = 8.0;
  Tensor gf({3, 3});
  const BilinearGrad g = bilinear_sample_backward(f, 1.25, 1.5, 1.0, gf);
  CHECK(gf.at(1, 1) == doctest::Approx(0.75 * 0.5));
  CHECK(gf.at(1, 2) == doctest::Approx(0.75 * 0.5));
  CHECK(gf.at(2, 1) == doctest::Approx(0.25 * 0.5));
  CHECK(gf.at(2, 2) == doctest::Approx(0.25 * 0.5));
  // d/dy = (f(2,1)-f(1,1))*(1-wx) + (f(2,2)-f(1,2))*wx = 4*0.5 + 4*0.5
  CHECK(g.dy == doctest::Approx(4.0));
  CHECK(g.dx == doctest::Approx(2.0));
}

TEST_CASE("deform_conv2d: zero offsets reduce to the plain convolution") {
  Rng rng(3);
  Tensor x = rand_t({2, 7, 7}, rng);
  Tensor w = rand_t({3, 2, 3, 3}, rng);
  Tensor zeros({offset_channels(1, 3), 7, 7});
  CHECK(max_abs_diff(deform_conv2d(x, zeros, w), conv2d(x, w, 1, 1)) < 1e-10);
}

TEST_CASE("deform_conv2d: constant field is offset-invariant for interior samples") {
  Tensor x = Tensor::full({1, 9, 9}, 3.25);
  Rng rng(4);
  Tensor w = rand_t({2, 1, 3, 3}, rng);
  Tensor zeros({offset_channels(1, 3), 9, 9});
  Tensor small({offset_channels(1, 3), 9, 9});
  fill_uniform(small, rng, -0.4, 0.4);  // keeps every interior sample in bounds
  const Tensor base = deform_conv2d(x, zeros, w);
  const Tensor moved = deform_conv2d(x, small, w);
  // compare away from the border, where zero padding is never touched
  double worst = 0.0;
  for (int c = 0; c < 2; ++c)
    for (int y = 2; y < 7; ++y)
      for (int xx = 2; xx < 7; ++xx)
        worst = std::max(worst, std::abs(base.at(c, y, xx) - moved.at(c, y, xx)));
  CHECK(worst < 1e-12);
}

TEST_CASE("deform_conv2d: uniform integer offsets equal shift-then-convolve") {
  Rng rng(5);
  Tensor x = rand_t({1, 8, 8}, rng);
  Tensor w = rand_t({2, 1, 3, 3}, rng);
  Tensor off({offset_channels(1, 3), 8, 8});
  for (int s = 0; s < 9; ++s)
    for (int p = 0; p < 64; ++p) off.data[static_cast<size_t>(2 * s) * 64 + p] = 1.0;  // dy=+1

  Tensor plane({8, 8});
  std::copy(x.data.begin(), x.data.end(), plane.data.begin());
  Tensor shifted_plane = oracle::shift_zero_pad(plane, 1, 0);
  Tensor shifted({1, 8, 8});
  std::copy(shifted_plane.data.begin(), shifted_plane.data.end(), shifted.data.begin());

  CHECK(max_abs_diff(deform_conv2d(x, off, w), conv2d(shifted, w, 1, 1)) < 1e-12);
}

TEST_CASE("deform_conv2d: wrong offset channel count is a configuration error") {
  Tensor x({2, 5, 5});
  Tensor w({2, 2, 3, 3});
  Tensor bad({10, 5, 5});
  CHECK_THROWS_AS(deform_conv2d(x, bad, w), std::invalid_argument);
  Tensor bad_spatial({18, 4, 5});
  CHECK_THROWS_AS(deform_conv2d(x, bad_spatial, w), std::invalid_argument);
}

TEST_CASE("temporal_deform_agg_conv: T=1 with zero offsets equals deform_conv2d") {
  Rng rng(6);
  Tensor clip = rand_t({1, 6, 6}, rng);
  Tensor w = rand_t({2, 1, 3, 3}, rng);
  Tensor zeros({offset_channels(1, 3), 6, 6});
  CHECK(max_abs_diff(temporal_deform_agg_conv(clip, zeros, w),
                     deform_conv2d(clip, zeros, w)) == 0.0);
}

TEST_CASE("temporal_deform_agg_conv: zero offsets equal early fusion") {
  Rng rng(7);
  Tensor clip = rand_t({3, 10, 10}, rng);
  Tensor w = rand_t({4, 3, 3, 3}, rng);
  Tensor zeros({offset_channels(3, 3), 10, 10});
  CHECK(max_abs_diff(temporal_deform_agg_conv(clip, zeros, w),
                     oracle::conv2d_direct(clip, w, 1, 1)) < 1e-10);
}

TEST_CASE("temporal_deform_agg_conv: matches the quadruple-loop bilinear oracle") {
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor clip = rand_t({3, 6, 6}, rng);
    Tensor w = rand_t({2, 3, 3, 3}, rng);
    Tensor off({offset_channels(3, 3), 6, 6});
    fill_uniform(off, rng, -1.5, 1.5);
    CHECK(max_abs_diff(temporal_deform_agg_conv(clip, off, w),
                       oracle::temporal_deform_direct(clip, off, w)) < 1e-10);
  }
}

TEST_CASE("temporal_deform_agg_conv: frame count mismatches are rejected") {
  Tensor clip({3, 6, 6});
  Tensor w5({2, 5, 3, 3});
  Tensor off3({offset_channels(3, 3), 6, 6});
  CHECK_THROWS_AS(temporal_deform_agg_conv(clip, off3, w5), std::invalid_argument);
  Tensor off5({offset_channels(5, 3), 6, 6});
  Tensor w3({2, 3, 3, 3});
  CHECK_THROWS_AS(temporal_deform_agg_conv(clip, off5, w3), std::invalid_argument);
  Tensor even({2, 6, 6});
  CHECK_THROWS_AS(temporal_deform_agg_conv(even, off3, w3), std::invalid_argument);
}

TEST_CASE("temporal_deform_agg_conv: linear in clip and in weights, offsets fixed") {
  Rng rng(9);
  Tensor a = rand_t({3, 6, 6}, rng), b = rand_t({3, 6, 6}, rng);
  Tensor w = rand_t({2, 3, 3, 3}, rng);
  Tensor off = off_lattice_offsets({offset_channels(3, 3), 6, 6}, rng);

  Tensor mix(a.shape);
  for (int i = 0; i < mix.numel(); ++i) mix.at(i) = 1.5 * a.at(i) - 0.5 * b.at(i);
  Tensor fa = temporal_deform_agg_conv(a, off, w);
  Tensor fb = temporal_deform_agg_conv(b, off, w);
  Tensor want(fa.shape);
  for (int i = 0; i < want.numel(); ++i) want.at(i) = 1.5 * fa.at(i) - 0.5 * fb.at(i);
  CHECK(max_abs_diff(temporal_deform_agg_conv(mix, off, w), want) < 1e-10);

  Tensor w2 = rand_t({2, 3, 3, 3}, rng);
  Tensor wmix(w.shape);
  for (int i = 0; i < wmix.numel(); ++i) wmix.at(i) = 0.25 * w.at(i) + 2.0 * w2.at(i);
  Tensor g1 = temporal_deform_agg_conv(a, off, w);
  Tensor g2 = temporal_deform_agg_conv(a, off, w2);
  Tensor wwant(g1.shape);
  for (int i = 0; i < wwant.numel(); ++i) wwant.at(i) = 0.25 * g1.at(i) + 2.0 * g2.at(i);
  CHECK(max_abs_diff(temporal_deform_agg_conv(a, off, wmix), wwant) < 1e-10);
}

TEST_CASE("temporal backward: zero upstream grad gives zero gradients") {
  Rng rng(10);
  Tensor clip = rand_t({3, 6, 6}, rng);
  Tensor w = rand_t({2, 3, 3, 3}, rng);
  Tensor off = off_lattice_offsets({offset_channels(3, 3), 6, 6}, rng);
  Tensor zero_up({2, 6, 6});
  DeformConvGrads g = temporal_deform_agg_conv_backward(clip, off, w, zero_up);
  for (double v : g.input.data) CHECK(v == 0.0);
  for (double v : g.offsets.data) CHECK(v == 0.0);
  for (double v : g.weight.data) CHECK(v == 0.0);
}

TEST_CASE("temporal backward: FD check on all three gradient paths") {
  Rng rng(11);
  std::vector<Tensor> inputs = {rand_t({3, 6, 6}, rng),
                                off_lattice_offsets({offset_channels(3, 3), 6, 6}, rng),
                                rand_t({2, 3, 3, 3}, rng)};
  auto fwd = [](const std::vector<Tensor>& in) {
    return temporal_deform_agg_conv(in[0], in[1], in[2]);
  };
  auto bwd = [](const std::vector<Tensor>& in, const Tensor& u) {
    DeformConvGrads g = temporal_deform_agg_conv_backward(in[0], in[1], in[2], u);
    return std::vector<Tensor>{g.input, g.offsets, g.weight};
  };
  GradCheckReport rep = check_gradient(fwd, bwd, inputs, 1e-5, rng);
  CHECK(rep.finite);
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("deform ops preserve the spatial size (same-padding contract)") {
  Rng rng(12);
  for (int n : {4, 6, 10}) {
    Tensor clip = rand_t({3, n, n}, rng);
    Tensor w = rand_t({2, 3, 3, 3}, rng);
    Tensor off({offset_channels(3, 3), n, n});
    Tensor y = temporal_deform_agg_conv(clip, off, w);
    CHECK(y.dim(1) == n);
    CHECK(y.dim(2) == n);
  }
}

TEST_CASE("translation consistency: uniform integer offsets shift every frame") {
  Rng rng(13);
  Tensor clip = rand_t({3, 8, 8}, rng);
  Tensor w = rand_t({2, 3, 3, 3}, rng);
  Tensor off({offset_channels(3, 3), 8, 8});
  // dy = -1, dx = +2 everywhere, all frames
  for (int t = 0; t < 3; ++t)
    for (int s = 0; s < 9; ++s)
      for (int p = 0; p < 64; ++p) {
        off.data[(static_cast<size_t>(t) * 18 + 2 * s) * 64 + p] = -1.0;
        off.data[(static_cast<size_t>(t) * 18 + 2 * s + 1) * 64 + p] = 2.0;
      }
  Tensor shifted({3, 8, 8});
  for (int t = 0; t < 3; ++t) {
    Tensor plane({8, 8});
    std::copy_n(clip.data.begin() + t * 64, 64, plane.data.begin());
    Tensor sp = oracle::shift_zero_pad(plane, -1, 2);
    std::copy(sp.data.begin(), sp.data.end(), shifted.data.begin() + t * 64);
  }
  Tensor zeros({offset_channels(3, 3), 8, 8});
  CHECK(max_abs_diff(temporal_deform_agg_conv(clip, off, w),
                     temporal_deform_agg_conv(shifted, zeros, w)) < 1e-12);
}
