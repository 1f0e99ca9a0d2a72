#include "deunet/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace deunet {

void TrainConfig::validate() const {
  if (lr <= 0 || weight_decay < 0) throw std::invalid_argument("train config: bad lr/wd");
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (patience_epochs < 0) throw std::invalid_argument("train config: negative patience");
  if (folds < 2) throw std::invalid_argument("train config: folds must be >= 2");
  if (max_epochs < 1) throw std::invalid_argument("train config: max_epochs must be >= 1");
}

void Adam::step(ModelParams& params) {
  if (!params.grads_ready)
    throw std::logic_error("adam step requested before any backward pass");
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  if (m_.empty()) {
    m_.reserve(static_cast<size_t>(params.size()));
    v_.reserve(static_cast<size_t>(params.size()));
    for (int i = 0; i < params.size(); ++i) {
      m_.emplace_back(Tensor(params[i].value.shape));
      v_.emplace_back(Tensor(params[i].value.shape));
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  for (int i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    double* val = p.value.ptr();
    const double* g = p.grad.ptr();
    double* m = m_[static_cast<size_t>(i)].ptr();
    double* v = v_[static_cast<size_t>(i)].ptr();
    const std::int64_t n = p.value.numel();
    for (std::int64_t j = 0; j < n; ++j) {
      double x = val[j];
      if (wd_ > 0.0) x -= lr_ * wd_ * x;  // decoupled decay, before the update
      m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
      v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      val[j] = x - lr_ * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

namespace {

enum : unsigned { kMirror = 1, kFlip = 2 };

// apply mirror/flip/rot90 to one [H,W] plane; out must hold the result shape
template <typename T>
void transform_plane(const T* in, int h, int w, unsigned flags, int rot, T* out) {
  const int oh = (rot % 2 == 0) ? h : w;
  (void)oh;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int sy = y, sx = x;
      if (flags & kMirror) sx = w - 1 - sx;  // horizontal mirror
      if (flags & kFlip) sy = h - 1 - sy;    // vertical (axial) flip
      // rotate the (sy,sx) sample by rot*90 degrees counterclockwise
      int ty = sy, tx = sx, th = h, tw = w;
      for (int k = 0; k < rot; ++k) {
        const int ny = tw - 1 - tx;
        const int nx = ty;
        ty = ny;
        tx = nx;
        std::swap(th, tw);
      }
      out[static_cast<size_t>(ty) * tw + tx] = in[static_cast<size_t>(y) * w + x];
    }
  }
}

}  // namespace

void augment(Tensor& clip, SegmentationMask& mask, Rng& rng) {
  unsigned flags = 0;
  if (rng.uniform() < 0.5) flags |= kMirror;
  if (rng.uniform() < 0.5) flags |= kFlip;
  const int rot = rng.uniform_int(4);
  if (flags == 0 && rot == 0) return;

  const int t = clip.dim(0), h = clip.dim(1), w = clip.dim(2);
  const int oh = (rot % 2 == 0) ? h : w;
  const int ow = (rot % 2 == 0) ? w : h;
  Tensor out({t, oh, ow});
  for (int f = 0; f < t; ++f)
    transform_plane(clip.ptr() + static_cast<size_t>(f) * h * w, h, w, flags, rot,
                    out.ptr() + static_cast<size_t>(f) * oh * ow);
  clip = std::move(out);

  SegmentationMask m2(oh, ow, mask.spacing);
  transform_plane(mask.labels.data(), h, w, flags, rot, m2.labels.data());
  mask = std::move(m2);
}

LossResult softmax_cross_entropy(const Tensor& logits, const SegmentationMask& gt) {
  if (logits.rank() != 3)
    throw std::invalid_argument("loss: logits must be [C,H,W]");
  const int c = logits.dim(0), h = logits.dim(1), w = logits.dim(2);
  if (gt.h != h || gt.w != w)
    throw std::invalid_argument("loss: mask shape does not match logits");
  LossResult res;
  res.grad = Tensor(logits.shape);
  const double inv_n = 1.0 / (static_cast<double>(h) * w);
  std::vector<double> p(static_cast<size_t>(c));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int label = gt.at(y, x);
      if (label < 0 || label >= c)
        throw std::invalid_argument("loss: label " + std::to_string(label) +
                                    " outside the class set");
      double mx = logits.at(0, y, x);
      for (int ci = 1; ci < c; ++ci) mx = std::max(mx, logits.at(ci, y, x));
      double sum = 0.0;
      for (int ci = 0; ci < c; ++ci) {
        p[static_cast<size_t>(ci)] = std::exp(logits.at(ci, y, x) - mx);
        sum += p[static_cast<size_t>(ci)];
      }
      for (int ci = 0; ci < c; ++ci) {
        const double q = p[static_cast<size_t>(ci)] / sum;
        res.grad.at(ci, y, x) = inv_n * (q - (ci == label ? 1.0 : 0.0));
        if (ci == label) res.value -= inv_n * std::log(q);
      }
    }
  }
  return res;
}

std::vector<std::uint32_t> Dataset::subjects() const {
  std::vector<std::uint32_t> ids;
  for (const auto& s : samples) ids.push_back(s.subject);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::vector<std::pair<std::vector<int>, std::vector<int>>> kfold_split(
    const Dataset& data, int folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("kfold_split: folds must be >= 2");
  std::vector<std::uint32_t> subs = data.subjects();
  if (static_cast<int>(subs.size()) < folds)
    throw std::invalid_argument("kfold_split: fewer subjects (" +
                                std::to_string(subs.size()) + ") than folds (" +
                                std::to_string(folds) + ")");
  Rng rng(seed);
  for (size_t i = subs.size(); i > 1; --i)
    std::swap(subs[i - 1], subs[static_cast<size_t>(rng.uniform_int(static_cast<int>(i)))]);

  // contiguous chunks, sizes within one of each other
  const int n = static_cast<int>(subs.size());
  std::vector<std::pair<std::vector<int>, std::vector<int>>> result;
  int start = 0;
  for (int f = 0; f < folds; ++f) {
    const int len = n / folds + (f < n % folds ? 1 : 0);
    std::vector<std::uint32_t> val_subs(subs.begin() + start, subs.begin() + start + len);
    start += len;
    std::vector<int> train_idx, val_idx;
    for (int i = 0; i < data.size(); ++i) {
      const bool in_val = std::find(val_subs.begin(), val_subs.end(),
                                    data.samples[static_cast<size_t>(i)].subject) !=
                          val_subs.end();
      (in_val ? val_idx : train_idx).push_back(i);
    }
    result.emplace_back(std::move(train_idx), std::move(val_idx));
  }
  return result;
}

double evaluate_mean_dice(const DeUNet& net, const Dataset& data,
                          const std::vector<int>& idx) {
  if (idx.empty()) return 0.0;
  double acc = 0.0;
  for (int i : idx) {
    const ClipSample& s = data.samples[static_cast<size_t>(i)];
    const SegmentationMask pred = predict_mask(net.forward(s.clip), s.spacing);
    double d = 0.0;
    for (int cls = 1; cls < kNumClasses; ++cls) d += dice(pred, s.mask, cls);
    acc += d / (kNumClasses - 1);
  }
  return acc / static_cast<double>(idx.size());
}

std::string TrainResult::history_csv() const {
  std::ostringstream os;
  os << "epoch,loss,val_dice\n";
  os.precision(17);
  for (const EpochStat& e : history)
    os << e.epoch << ',' << e.train_loss << ',' << e.val_dice << '\n';
  return os.str();
}

TrainResult train(DeUNet& net, const Dataset& data, const std::vector<int>& train_idx,
                  const std::vector<int>& val_idx, const TrainConfig& cfg,
                  const EpochObserver& on_epoch) {
  cfg.validate();
  if (train_idx.empty() || val_idx.empty())
    throw std::invalid_argument("train: empty train or validation set");

  Adam adam(cfg.lr, cfg.weight_decay);
  Rng root(cfg.seed);
  TrainResult res;
  res.best_dice = -1.0;
  int since_improve = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::vector<int> order = train_idx;
    Rng shuffle_rng = root.fork(0xE50C000000000000ULL + static_cast<std::uint64_t>(epoch));
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1],
                order[static_cast<size_t>(shuffle_rng.uniform_int(static_cast<int>(i)))]);

    double loss_sum = 0.0;
    for (size_t b = 0; b < order.size(); b += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), b + static_cast<size_t>(cfg.batch_size));
      const double inv_batch = 1.0 / static_cast<double>(end - b);
      net.params().zero_grad();
      for (size_t k = b; k < end; ++k) {
        const int idx = order[k];
        const ClipSample& s = data.samples[static_cast<size_t>(idx)];
        Tensor clip = s.clip;
        SegmentationMask mask = s.mask;
        Rng arng = root.fork((static_cast<std::uint64_t>(epoch) << 32) |
                             static_cast<std::uint64_t>(idx));
        augment(clip, mask, arng);
        DeUNet::Trace tr;
        const Tensor logits = net.forward(clip, &tr);
        LossResult lr = softmax_cross_entropy(logits, mask);
        if (!std::isfinite(lr.value))
          throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                   std::to_string(epoch));
        loss_sum += lr.value;
        scale(lr.grad, inv_batch);
        net.backward(lr.grad, tr);
      }
      adam.step(net.params());
    }

    EpochStat stat;
    stat.epoch = epoch;
    stat.train_loss = loss_sum / static_cast<double>(order.size());
    stat.val_dice = evaluate_mean_dice(net, data, val_idx);
    res.history.push_back(stat);
    if (on_epoch) on_epoch(stat);

    if (stat.val_dice > res.best_dice) {
      res.best_dice = stat.val_dice;
      res.best_epoch = epoch;
      res.best_values = net.params().snapshot_values();
      since_improve = 0;
    } else {
      ++since_improve;
    }
    if (since_improve >= cfg.patience_epochs) break;
  }
  return res;
}

}  // namespace deunet
