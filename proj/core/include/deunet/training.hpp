// Training protocol: Adam with decoupled weight decay, mirror/flip/rotation
// augmentation, pixel-wise cross-entropy, early stopping on validation Dice,
// and subject-grouped k-fold splits. Fully deterministic in the seed.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "deunet/dataset.hpp"
#include "deunet/network.hpp"

namespace deunet {

struct TrainConfig {
  double lr = 2e-4;
  double weight_decay = 1e-4;
  int batch_size = 12;
  int patience_epochs = 20;
  int folds = 5;
  int r = 1;
  std::uint64_t seed = 0;
  int max_epochs = 60;

  void validate() const;
};

// Adam, beta1 0.9, beta2 0.999, eps 1e-8, all in double precision. Weight
// decay is decoupled and applied as value <- value - lr*wd*value before the
// moment update. Moment buffers persist across steps.
class Adam {
 public:
  Adam(double lr, double weight_decay) : lr_(lr), wd_(weight_decay) {}

  // throws std::logic_error when no backward has populated the grads
  void step(ModelParams& params);
  std::int64_t steps() const { return t_; }

 private:
  double lr_, wd_;
  std::int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

// Independently sampled horizontal mirror (p=1/2), vertical flip (p=1/2) and
// rotation by k*90 degrees (k uniform in 0..3); one draw applied identically
// to every frame of the clip and to the mask.
void augment(Tensor& clip, SegmentationMask& mask, Rng& rng);

struct LossResult {
  double value = 0.0;
  Tensor grad;  // d(loss)/d(logits)
};
// mean per-pixel softmax cross-entropy over the classes
LossResult softmax_cross_entropy(const Tensor& logits, const SegmentationMask& gt);

// Deterministic subject-grouped partition: all clips of a subject stay in
// one fold; validation folds are disjoint, exhaustive, sized within one
// subject of each other. Returns (train, val) sample index sets per fold.
std::vector<std::pair<std::vector<int>, std::vector<int>>> kfold_split(
    const Dataset& data, int folds, std::uint64_t seed);

struct EpochStat {
  int epoch = 0;
  double train_loss = 0.0;
  double val_dice = 0.0;
};

struct TrainResult {
  std::vector<EpochStat> history;
  std::vector<Tensor> best_values;  // parameter snapshot at the best epoch
  double best_dice = 0.0;
  int best_epoch = 0;
  std::string history_csv() const;
};

// mean foreground Dice of the network over the given samples
double evaluate_mean_dice(const DeUNet& net, const Dataset& data,
                          const std::vector<int>& idx);

// Epoch loop of augment -> forward -> loss -> backward -> adam step; keeps
// the best-validation-Dice parameters and stops after patience_epochs
// epochs without improvement. Aborts with a diagnostic on non-finite loss.
// on_epoch, when set, observes each completed epoch (progress reporting).
using EpochObserver = std::function<void(const EpochStat&)>;
TrainResult train(DeUNet& net, const Dataset& data, const std::vector<int>& train_idx,
                  const std::vector<int>& val_idx, const TrainConfig& cfg,
                  const EpochObserver& on_epoch = nullptr);

}  // namespace deunet
