// Named learnable parameters with paired gradient buffers, and the model
// checkpoint format.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "deunet/tensor.hpp"

namespace deunet {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool zero_init = false;  // offset heads and the attention scale start at 0
};

// Ordered collection of parameters. Registration order is the deterministic
// iteration and serialization order. Initialization lands on the float32
// grid, and checkpoints store f32, so values sourced from init or from a
// checkpoint round-trip through serialization bit-exactly; training updates
// run in full double and truncate only when saved.
class ModelParams {
 public:
  int add(const std::string& name, std::vector<int> shape, bool zero_init = false);

  Parameter& operator[](int i) { return params_[static_cast<size_t>(i)]; }
  const Parameter& operator[](int i) const { return params_[static_cast<size_t>(i)]; }
  int find(const std::string& name) const;  // -1 when absent
  int size() const { return static_cast<int>(params_.size()); }
  std::int64_t scalar_count() const;

  void zero_grad();
  // Fan-based uniform init for weights, zeros for rank-1 biases and for
  // zero_init parameters. Deterministic in the seed.
  void init(std::uint64_t seed);

  std::vector<Tensor> snapshot_values() const;
  void restore_values(const std::vector<Tensor>& values);

  // set once a backward pass has populated the gradients; cleared by zero_grad
  bool grads_ready = false;

 private:
  std::vector<Parameter> params_;
  std::map<std::string, int> index_;
};

// round to the nearest float32 and back
double snap_f32(double v);
void snap_f32(Tensor& t);

// Checkpoint file: magic "DEUNET01", u32 parameter count, then per parameter
// name length (u32 LE), UTF-8 name, rank (u32), dims (u32 each), raw LE f32
// values; a trailing metadata block (u32 length + UTF-8 text) echoes the run
// configuration.
struct Checkpoint {
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::string metadata;
};

std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params,
                                            const std::string& metadata);
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const std::string& metadata);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);
Checkpoint load_checkpoint(const std::string& path);
// exact same parameter set (names and shapes) required
void apply_checkpoint(ModelParams& params, const Checkpoint& ckpt);

}  // namespace deunet
