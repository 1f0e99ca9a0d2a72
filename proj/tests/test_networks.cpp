#include <doctest.h>

#include <stdexcept>

#include "deunet/gradcheck.hpp"
#include "deunet/network.hpp"
#include "deunet/oracles.hpp"
#include "deunet/selfcheck.hpp"

using namespace deunet;

namespace {
Tensor rand_t(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  fill_uniform(t, rng, lo, hi);
  return t;
}

UNet make_offset_net(ModelParams& p, int T, int S, int depth, int base) {
  UNetOptions opt;
  opt.in_ch = T;
  opt.out_ch = offset_channels(T, S);
  opt.depth = depth;
  opt.base = base;
  opt.S = S;
  opt.zero_init_head = true;
  return UNet(p, "offset_net", opt);
}
}  // namespace

TEST_CASE("offset net: zero parameters predict a zero offset field") {
  ModelParams p;
  UNet net = make_offset_net(p, 3, 3, 2, 4);
  Rng rng(1);
  Tensor clip = rand_t({3, 16, 16}, rng, 0.0, 1.0);
  Tensor off = net.forward(p, clip, nullptr);  // params default to zero
  for (double v : off.data) CHECK(v == 0.0);
}

TEST_CASE("offset net: head width is T*2*S^2 and spatial size is preserved") {
  ModelParams p;
  UNet net = make_offset_net(p, 3, 3, 2, 4);
  p.init(7);
  Rng rng(2);
  Tensor clip = rand_t({3, 32, 32}, rng, 0.0, 1.0);
  Tensor off = net.forward(p, clip, nullptr);
  CHECK(off.shape == std::vector<int>{54, 32, 32});

  // zero-initialized head: offsets are exactly zero right after init
  for (double v : off.data) CHECK(v == 0.0);
}

TEST_CASE("offset net: deterministic forward, indivisible size rejected") {
  ModelParams p;
  UNet net = make_offset_net(p, 3, 3, 2, 4);
  p.init(9);
  Rng rng(3);
  Tensor clip = rand_t({3, 16, 16}, rng, 0.0, 1.0);
  Tensor a = net.forward(p, clip, nullptr);
  Tensor b = net.forward(p, clip, nullptr);
  CHECK(a.data == b.data);

  Tensor bad = rand_t({3, 18, 18}, rng, 0.0, 1.0);
  CHECK_THROWS_AS(net.forward(p, bad, nullptr), std::invalid_argument);
}

TEST_CASE("offset net composed with temporal aggregation passes the FD check") {
  ModelParams p;
  UNet net = make_offset_net(p, 3, 3, 1, 2);
  const int wi = p.add("agg.w", {2, 3, 3, 3});
  Rng rng(4);
  fd_friendly_randomize(p, rng);
  Tensor clip = rand_t({3, 16, 16}, rng, 0.0, 1.0);
  Tensor u = rand_t({2, 16, 16}, rng);
  scale(u, 1.0 / 32.0);

  p.zero_grad();
  UNet::Trace tr;
  Tensor offsets = net.forward(p, clip, &tr);
  temporal_deform_agg_conv(clip, offsets, p[wi].value);
  DeformConvGrads dg = temporal_deform_agg_conv_backward(clip, offsets, p[wi].value, u);
  axpy(1.0, dg.weight, p[wi].grad);
  net.backward(p, tr, std::move(dg.offsets));

  auto objective = [&]() {
    const Tensor off = net.forward(p, clip, nullptr);
    const Tensor fused = temporal_deform_agg_conv(clip, off, p[wi].value);
    double j = 0.0;
    for (std::int64_t i = 0; i < fused.numel(); ++i)
      j += u.data[static_cast<size_t>(i)] * fused.data[static_cast<size_t>(i)];
    return j;
  };
  std::vector<FdTarget> targets;
  for (int i = 0; i < p.size(); ++i)
    targets.push_back({p[i].name, p[i].value.ptr(), p[i].grad.ptr(), p[i].value.numel()});
  GradCheckReport rep = fd_check_scalar_multi(objective, targets, {1e-4, 1e-5, 1e-7}, 5e-4);
  CHECK(rep.finite);
  CHECK(rep.max_rel_err < 1e-3);
}

TEST_CASE("dgpa block: N=1 affinity is [[1]] so Z = alpha*D + O") {
  ModelParams p;
  DgpaBlock blk = DgpaBlock::make(p, "blk", 1, 3, false);
  Rng rng(5);
  fd_friendly_randomize(p, rng);
  Tensor x = rand_t({1, 4, 4}, rng);
  DgpaBlock::Trace tr;
  Tensor z = blk.forward(p, x, &tr);
  CHECK(tr.pm.shape == std::vector<int>{1, 1});
  CHECK(tr.pm.at(0, 0) == 1.0);
  const double alpha = p[blk.alpha].value.at(0);
  for (int i = 0; i < z.numel(); ++i)
    CHECK(z.at(i) == doctest::Approx(alpha * tr.dm.at(i) + tr.o.at(i)).epsilon(1e-12));
}

TEST_CASE("dgpa block: literal_reshape ties B, C, D to O itself") {
  ModelParams p;
  DgpaBlock blk = DgpaBlock::make(p, "blk", 3, 3, true);
  CHECK(p.find("blk.proj_b.w") == -1);  // no projection parameters exist
  Rng rng(6);
  fd_friendly_randomize(p, rng);
  Tensor x = rand_t({3, 4, 4}, rng);
  DgpaBlock::Trace tr;
  blk.forward(p, x, &tr);
  Tensor of = tr.o;
  of.shape = {3, 16};
  CHECK(max_abs_diff(tr.bm, of) == 0.0);
  CHECK(max_abs_diff(tr.cm, of) == 0.0);
  CHECK(max_abs_diff(tr.dm, of) == 0.0);
}

TEST_CASE("dgpa unet: shape contract and zero-offset-head plain-conv equivalence") {
  ModelParams p;
  UNetOptions opt;
  opt.in_ch = 4;
  opt.out_ch = 4;
  opt.depth = 2;
  opt.base = 4;
  opt.deform_encoders = true;
  opt.tail = UNetOptions::Tail::dgpa;
  UNet net(p, "seg_net", opt);
  p.init(11);  // offset heads and alpha land at zero
  Rng rng(7);
  Tensor x = rand_t({4, 32, 32}, rng, 0.0, 1.0);
  Tensor logits = net.forward(p, x, nullptr);
  CHECK(logits.shape == std::vector<int>{4, 32, 32});
  CHECK(max_abs_diff(logits, oracle::plain_unet_forward(p, net, x)) < 1e-10);
}

TEST_CASE("full network: logits shape and bit-identical determinism") {
  NetConfig cfg;
  cfg.depth = 2;
  cfg.base_channels = 4;
  cfg.tdam_channels = 4;
  DeUNet net(cfg, NetVariant::full);
  net.params().init(13);
  Rng rng(8);
  Tensor clip = rand_t({3, 32, 32}, rng, 0.0, 1.0);
  Tensor a = net.forward(clip);
  CHECK(a.shape == std::vector<int>{4, 32, 32});
  Tensor b = net.forward(clip);
  CHECK(a.data == b.data);
}

TEST_CASE("full network at init matches early fusion + plain U-Net to 1e-8") {
  CheckOptions opt;
  opt.init_equiv_cases = 3;
  for (const CheckResult& r : check_init_equivalence(opt)) CHECK(r.pass);
}

TEST_CASE("variants: parameter sets differ as the architecture does") {
  NetConfig cfg;
  cfg.depth = 1;
  cfg.base_channels = 2;
  cfg.tdam_channels = 2;
  DeUNet full(cfg, NetVariant::full);
  DeUNet no_tdam(cfg, NetVariant::no_tdam);
  DeUNet no_dgpa(cfg, NetVariant::no_dgpa);

  CHECK(full.params().find("offset_net.head.w") >= 0);
  CHECK(no_tdam.params().find("offset_net.head.w") == -1);  // no offset net at all
  CHECK(no_tdam.params().find("tdam.w") >= 0);              // early fusion kernel remains
  CHECK(full.params().find("seg_net.dgpa.alpha") >= 0);
  CHECK(no_dgpa.params().find("seg_net.dgpa.alpha") == -1);
  CHECK(no_dgpa.params().find("seg_net.tail.w") >= 0);
  CHECK(no_dgpa.params().find("offset_net.head.w") >= 0);
}

TEST_CASE("variants: forward works and backward fills only existing params") {
  Rng rng(9);
  NetConfig cfg;
  cfg.depth = 1;
  cfg.base_channels = 2;
  cfg.tdam_channels = 2;
  Tensor clip = rand_t({3, 16, 16}, rng, 0.0, 1.0);
  for (NetVariant v : {NetVariant::full, NetVariant::no_tdam, NetVariant::no_dgpa}) {
    DeUNet net(cfg, v);
    net.params().init(17);
    DeUNet::Trace tr;
    Tensor logits = net.forward(clip, &tr);
    CHECK(logits.shape == std::vector<int>{4, 16, 16});
    Tensor u = rand_t(logits.shape, rng);
    net.params().zero_grad();
    net.backward(u, tr);
    CHECK(net.params().grads_ready);
    // zero upstream -> zero grads
    net.params().zero_grad();
    DeUNet::Trace tr2;
    net.forward(clip, &tr2);
    net.backward(Tensor(logits.shape), tr2);
    for (int i = 0; i < net.params().size(); ++i)
      for (double g : net.params()[i].grad.data) CHECK(g == 0.0);
  }
}

TEST_CASE("backward before forward is a state error") {
  NetConfig cfg;
  cfg.depth = 1;
  cfg.base_channels = 2;
  cfg.tdam_channels = 2;
  DeUNet net(cfg, NetVariant::full);
  net.params().init(1);
  DeUNet::Trace tr;
  Tensor u({4, 16, 16});
  CHECK_THROWS_AS(net.backward(u, tr), std::logic_error);
}

TEST_CASE("predict_mask: tie rule, one-hot case, argmax oracle, shift invariance") {
  Tensor zero({4, 3, 3});
  SegmentationMask m = predict_mask(zero);
  for (auto l : m.labels) CHECK(l == 0);  // all ties -> background

  Tensor onehot({4, 2, 2});
  onehot.at(2, 0, 1) = 5.0;
  onehot.at(3, 1, 1) = 2.0;
  SegmentationMask mh = predict_mask(onehot);
  CHECK(mh.at(0, 0) == 0);
  CHECK(mh.at(0, 1) == 2);
  CHECK(mh.at(1, 1) == 3);

  Rng rng(10);
  Tensor logits = rand_t({4, 8, 8}, rng);
  SegmentationMask got = predict_mask(logits);
  SegmentationMask want = oracle::argmax_direct(logits);
  CHECK(got.labels == want.labels);

  Tensor shifted = logits;
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < 64; ++i) shifted.data[static_cast<size_t>(c) * 64 + i] += 3.75;
  CHECK(predict_mask(shifted).labels == got.labels);
}

TEST_CASE("checkpoint: round-trips every variant and preserves forward output") {
  Rng rng(11);
  NetConfig cfg;
  cfg.depth = 1;
  cfg.base_channels = 2;
  cfg.tdam_channels = 2;
  Tensor clip = rand_t({3, 16, 16}, rng, 0.0, 1.0);
  for (NetVariant v : {NetVariant::full, NetVariant::no_tdam, NetVariant::no_dgpa}) {
    DeUNet net(cfg, v);
    net.params().init(19);
    const auto bytes = encode_checkpoint(net.params(), cfg.to_metadata(v));
    const Checkpoint ckpt = decode_checkpoint(bytes);
    auto [cfg2, v2] = NetConfig::from_metadata(ckpt.metadata);
    CHECK(v2 == v);
    DeUNet net2(cfg2, v2);
    apply_checkpoint(net2.params(), ckpt);
    CHECK(net.forward(clip).data == net2.forward(clip).data);
  }
}

TEST_CASE("checkpoint metadata: missing variant and bad values are rejected") {
  CHECK_THROWS_AS(NetConfig::from_metadata("S=3\nr=1\n"), std::invalid_argument);
  CHECK_THROWS_AS(NetConfig::from_metadata("variant=bogus\n"), std::invalid_argument);
}
