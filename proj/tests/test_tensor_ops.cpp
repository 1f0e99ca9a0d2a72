#include <doctest.h>

#include <stdexcept>

#include "deunet/gradcheck.hpp"
#include "deunet/oracles.hpp"
#include "deunet/ops.hpp"
#include "deunet/params.hpp"
#include "deunet/tensor.hpp"

using namespace deunet;

namespace {
Tensor rand_t(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  fill_uniform(t, rng, lo, hi);
  return t;
}
}  // namespace

TEST_CASE("conv2d: all-ones 3x3 kernel counts overlaps") {
  Tensor x = Tensor::full({1, 3, 3}, 1.0);
  Tensor w = Tensor::full({1, 1, 3, 3}, 1.0);
  Tensor y = conv2d(x, w, 1, 1);
  CHECK(y.at(0, 1, 1) == 9.0);
  CHECK(y.at(0, 0, 0) == 4.0);
  CHECK(y.at(0, 0, 2) == 4.0);
  CHECK(y.at(0, 2, 0) == 4.0);
  CHECK(y.at(0, 2, 2) == 4.0);
}

TEST_CASE("conv2d: Dirac kernel with same padding is the identity") {
  Rng rng(1);
  Tensor x = rand_t({2, 6, 5}, rng);
  Tensor w({2, 2, 3, 3});
  w.at(0, 0, 1, 1) = 1.0;
  w.at(1, 1, 1, 1) = 1.0;
  Tensor y = conv2d(x, w, 1, 1);
  CHECK(max_abs_diff(x, y) == 0.0);
}

TEST_CASE("conv2d: matches the direct six-loop oracle") {
  Rng rng(2);
  Tensor x = rand_t({2, 5, 5}, rng);
  Tensor w = rand_t({3, 2, 3, 3}, rng);
  CHECK(max_abs_diff(conv2d(x, w, 1, 1), oracle::conv2d_direct(x, w, 1, 1)) < 1e-12);
  CHECK(max_abs_diff(conv2d(x, w, 2, 0), oracle::conv2d_direct(x, w, 2, 0)) < 1e-12);
}

TEST_CASE("conv2d: linear in the input for fixed weights") {
  Rng rng(3);
  Tensor x = rand_t({2, 5, 5}, rng);
  Tensor y = rand_t({2, 5, 5}, rng);
  Tensor w = rand_t({3, 2, 3, 3}, rng);
  Tensor mix(x.shape);
  for (int i = 0; i < mix.numel(); ++i) mix.at(i) = 2.5 * x.at(i) - 0.75 * y.at(i);
  Tensor lhs = conv2d(mix, w, 1, 1);
  Tensor ca = conv2d(x, w, 1, 1), cb = conv2d(y, w, 1, 1);
  Tensor rhs(ca.shape);
  for (int i = 0; i < rhs.numel(); ++i) rhs.at(i) = 2.5 * ca.at(i) - 0.75 * cb.at(i);
  CHECK(max_abs_diff(lhs, rhs) < 1e-10);
}

TEST_CASE("conv2d: channel mismatch raises a dimension error") {
  Tensor x({2, 5, 5});
  Tensor w({3, 4, 3, 3});
  CHECK_THROWS_AS(conv2d(x, w, 1, 1), std::invalid_argument);
}

TEST_CASE("maxpool2d: window max and first-wins tie routing") {
  Tensor x({1, 2, 2});
  x.at(0, 0, 0) = 1;
  x.at(0, 0, 1) = 2;
  x.at(0, 1, 0) = 3;
  x.at(0, 1, 1) = 4;
  MaxPoolOut r = maxpool2d(x, 2);
  CHECK(r.output.numel() == 1);
  CHECK(r.output.at(0) == 4.0);

  Tensor c = Tensor::full({1, 2, 2}, 7.0);
  MaxPoolOut rc = maxpool2d(c, 2);
  CHECK(rc.argmax[0] == 0);  // row-major first element wins the tie
  Tensor g({1, 1, 1});
  g.at(0) = 1.0;
  Tensor gin = maxpool2d_backward(c.shape, rc.argmax, g);
  CHECK(gin.at(0) == 1.0);
  CHECK(gin.at(1) == 0.0);
}

TEST_CASE("maxpool2d: matches the window enumeration oracle") {
  Rng rng(4);
  Tensor x = rand_t({4, 8, 8}, rng);
  CHECK(max_abs_diff(maxpool2d(x, 2).output, oracle::maxpool_direct(x, 2)) == 0.0);
  CHECK(max_abs_diff(maxpool2d(x, 4).output, oracle::maxpool_direct(x, 4)) == 0.0);
}

TEST_CASE("maxpool2d: non-divisible spatial size raises") {
  Tensor x({1, 5, 4});
  CHECK_THROWS_AS(maxpool2d(x, 2), std::invalid_argument);
}

TEST_CASE("deconv2d: broadcasts a single value over the kernel footprint") {
  Tensor x({1, 1, 1});
  x.at(0) = 2.5;
  Tensor w = Tensor::full({1, 1, 2, 2}, 1.0);
  Tensor y = deconv2d(x, w, 2);
  CHECK(y.shape == std::vector<int>{1, 2, 2});
  for (int i = 0; i < 4; ++i) CHECK(y.at(i) == 2.5);

  Rng rng(5);
  Tensor z({2, 3, 3});
  Tensor wz = rand_t({2, 3, 2, 2}, rng);
  double s = 0;
  for (double v : deconv2d(z, wz, 2).data) s += std::abs(v);
  CHECK(s == 0.0);  // zero input -> zero output
}

TEST_CASE("deconv2d equals the input gradient of the matching conv (adjoint)") {
  Rng rng(6);
  Tensor x = rand_t({2, 3, 3}, rng);        // deconv input
  Tensor w = rand_t({2, 3, 2, 2}, rng);     // [Cin, Cout, k, k]
  Tensor up = deconv2d(x, w, 2);            // [3, 6, 6]
  // conv with the same weight maps [3,6,6] -> [2,3,3]; its input-gradient at
  // upstream x is the transpose, which is exactly deconv2d(x, w).
  Tensor probe = rand_t({3, 6, 6}, rng);
  Conv2dGrads g = conv2d_backward(probe, w, 2, 0, x);
  CHECK(max_abs_diff(up, g.input) < 1e-10);
}

TEST_CASE("deconv2d: stride must equal kernel size") {
  Tensor x({1, 2, 2});
  Tensor w({1, 1, 2, 2});
  CHECK_THROWS_AS(deconv2d(x, w, 3), std::invalid_argument);
}

TEST_CASE("matmul: identity, hand case, and triple-loop oracle") {
  Tensor eye({2, 2});
  eye.at(0, 0) = 1;
  eye.at(1, 1) = 1;
  Rng rng(7);
  Tensor x = rand_t({2, 3}, rng);
  CHECK(max_abs_diff(matmul(eye, x), x) == 0.0);

  Tensor a({2, 2});
  a.at(0, 0) = 1;
  a.at(0, 1) = 2;
  a.at(1, 0) = 3;
  a.at(1, 1) = 4;
  Tensor b = Tensor::full({2, 1}, 1.0);
  Tensor c = matmul(a, b);
  CHECK(c.at(0, 0) == 3.0);
  CHECK(c.at(1, 0) == 7.0);

  Tensor p = rand_t({7, 5}, rng);
  Tensor q = rand_t({5, 3}, rng);
  CHECK(max_abs_diff(matmul(p, q), oracle::matmul_direct(p, q)) < 1e-12);

  Tensor bad({4, 3});
  CHECK_THROWS_AS(matmul(p, bad), std::invalid_argument);
}

TEST_CASE("softmax_rows: symmetry, overflow stability, row sums") {
  Tensor flat({1, 3});
  Tensor s = softmax_rows(flat);
  for (int j = 0; j < 3; ++j) CHECK(s.at(0, j) == doctest::Approx(1.0 / 3).epsilon(1e-12));

  Tensor big({1, 2});
  big.at(0, 0) = 1000.0;
  Tensor sb = softmax_rows(big);
  CHECK(sb.all_finite());
  CHECK(sb.at(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(sb.at(0, 1) == doctest::Approx(0.0).epsilon(1e-9));

  Rng rng(8);
  Tensor x = rand_t({4, 6}, rng, -3.0, 3.0);
  Tensor y = softmax_rows(x);
  for (int i = 0; i < 4; ++i) {
    double sum = 0;
    for (int j = 0; j < 6; ++j) sum += y.at(i, j);
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }

  // invariant to adding a constant per row
  Tensor shifted = x;
  for (int j = 0; j < 6; ++j) shifted.at(2, j) += 17.5;
  CHECK(max_abs_diff(softmax_rows(shifted), y) < 1e-12);
}

TEST_CASE("check_gradient: a linear map is verified to machine precision") {
  Rng rng(9);
  Tensor a = rand_t({4, 4}, rng);
  auto fwd = [&](const std::vector<Tensor>& in) { return matmul(a, in[0]); };
  auto bwd = [&](const std::vector<Tensor>& in, const Tensor& u) {
    return std::vector<Tensor>{matmul_backward(a, in[0], u).b};
  };
  GradCheckReport rep = check_gradient(fwd, bwd, {rand_t({4, 2}, rng)}, 1e-5, rng);
  CHECK(rep.finite);
  CHECK(rep.max_rel_err < 1e-9);
}

TEST_CASE("check_gradient: conv2d and softmax module tolerances") {
  Rng rng(10);
  {
    std::vector<Tensor> inputs = {rand_t({2, 5, 5}, rng), rand_t({3, 2, 3, 3}, rng)};
    auto fwd = [](const std::vector<Tensor>& in) { return conv2d(in[0], in[1], 1, 1); };
    auto bwd = [](const std::vector<Tensor>& in, const Tensor& u) {
      Conv2dGrads g = conv2d_backward(in[0], in[1], 1, 1, u);
      return std::vector<Tensor>{g.input, g.weight};
    };
    CHECK(check_gradient(fwd, bwd, inputs, 1e-5, rng).max_rel_err < 1e-5);
  }
  {
    std::vector<Tensor> inputs = {rand_t({3, 4}, rng, -2.0, 2.0)};
    auto fwd = [](const std::vector<Tensor>& in) { return softmax_rows(in[0]); };
    auto bwd = [](const std::vector<Tensor>& in, const Tensor& u) {
      return std::vector<Tensor>{softmax_rows_backward(softmax_rows(in[0]), u)};
    };
    CHECK(check_gradient(fwd, bwd, inputs, 1e-5, rng).max_rel_err < 1e-6);
  }
}

TEST_CASE("check_gradient: eps outside [1e-7, 1e-4] is rejected") {
  auto objective = []() { return 0.0; };
  CHECK_THROWS_AS(fd_check_scalar(objective, {}, 1e-2), std::invalid_argument);
  CHECK_THROWS_AS(fd_check_scalar(objective, {}, 1e-8), std::invalid_argument);
}

TEST_CASE("relu and channel bias backward") {
  Rng rng(11);
  Tensor x = rand_t({2, 3, 3}, rng);
  Tensor u = rand_t({2, 3, 3}, rng);
  Tensor y = relu(x);
  for (int i = 0; i < x.numel(); ++i) CHECK(y.at(i) == (x.at(i) > 0 ? x.at(i) : 0.0));
  Tensor g = relu_backward(x, u);
  for (int i = 0; i < x.numel(); ++i) CHECK(g.at(i) == (x.at(i) > 0 ? u.at(i) : 0.0));

  Tensor b({2});
  b.at(0) = 0.5;
  b.at(1) = -1.0;
  Tensor yb = add_channel_bias(x, b);
  CHECK(yb.at(0, 1, 1) == x.at(0, 1, 1) + 0.5);
  CHECK(yb.at(1, 2, 2) == x.at(1, 2, 2) - 1.0);
  Tensor gb = channel_bias_backward(u);
  double want = 0;
  for (int i = 0; i < 9; ++i) want += u.at(i);
  CHECK(gb.at(0) == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("parameters: paired grads, zero_grad contract, unique names") {
  ModelParams p;
  const int a = p.add("conv.w", {2, 3, 3, 3});
  const int b = p.add("conv.b", {2});
  CHECK_THROWS_AS(p.add("conv.w", {1}), std::invalid_argument);
  CHECK(p[a].value.shape == p[a].grad.shape);
  CHECK(p[b].value.shape == p[b].grad.shape);
  p.init(3);
  p[a].grad.at(0) = 5.0;
  p.grads_ready = true;
  p.zero_grad();
  CHECK(p[a].grad.at(0) == 0.0);
  CHECK_FALSE(p.grads_ready);
  // init lands on the float32 grid
  for (double v : p[a].value.data) CHECK(v == snap_f32(v));
}

TEST_CASE("rng: deterministic, forkable, bounded") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c = Rng(42).fork(7), d = Rng(42).fork(7), e = Rng(42).fork(8);
  CHECK(c.next_u64() == d.next_u64());
  CHECK(c.next_u64() != e.next_u64());
  Rng f(3);
  for (int i = 0; i < 1000; ++i) {
    const double u = f.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const int k = f.uniform_int(4);
    CHECK(k >= 0);
    CHECK(k < 4);
  }
}
