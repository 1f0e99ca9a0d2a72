#include "deunet/params.hpp"

#include <cmath>
#include <stdexcept>

#include "deunet/binio.hpp"

namespace deunet {

int ModelParams::add(const std::string& name, std::vector<int> shape, bool zero_init) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  Parameter p;
  p.name = name;
  p.value = Tensor(shape);
  p.grad = Tensor(std::move(shape));
  p.zero_init = zero_init;
  const int idx = static_cast<int>(params_.size());
  params_.push_back(std::move(p));
  index_[name] = idx;
  return idx;
}

int ModelParams::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

std::int64_t ModelParams::scalar_count() const {
  std::int64_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

void ModelParams::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.data.begin(), p.grad.data.end(), 0.0);
  grads_ready = false;
}

void ModelParams::init(std::uint64_t seed) {
  Rng rng(seed);
  for (auto& p : params_) {
    Rng sub = rng.fork(static_cast<std::uint64_t>(index_.at(p.name)));
    if (p.zero_init || p.value.rank() == 1) {
      std::fill(p.value.data.begin(), p.value.data.end(), 0.0);
      continue;
    }
    const double fan_in = static_cast<double>(p.value.numel()) / p.value.dim(0);
    const double fan_out = static_cast<double>(p.value.numel()) / p.value.dim(1);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    fill_uniform(p.value, sub, -bound, bound);
    snap_f32(p.value);
  }
}

std::vector<Tensor> ModelParams::snapshot_values() const {
  std::vector<Tensor> v;
  v.reserve(params_.size());
  for (const auto& p : params_) v.push_back(p.value);
  return v;
}

void ModelParams::restore_values(const std::vector<Tensor>& values) {
  if (values.size() != params_.size())
    throw std::invalid_argument("restore_values: parameter count mismatch");
  for (size_t i = 0; i < values.size(); ++i) {
    if (!values[i].same_shape(params_[i].value))
      throw std::invalid_argument("restore_values: shape mismatch for " + params_[i].name);
    params_[i].value = values[i];
  }
}

double snap_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

void snap_f32(Tensor& t) {
  for (double& v : t.data) v = snap_f32(v);
}

static constexpr char kCkptMagic[8] = {'D', 'E', 'U', 'N', 'E', 'T', '0', '1'};

std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params,
                                            const std::string& metadata) {
  ByteWriter w;
  w.bytes(kCkptMagic, sizeof(kCkptMagic));
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (int i = 0; i < params.size(); ++i) {
    const Parameter& p = params[i];
    w.u32(static_cast<std::uint32_t>(p.name.size()));
    w.str(p.name);
    w.u32(static_cast<std::uint32_t>(p.value.rank()));
    for (int d : p.value.shape) w.u32(static_cast<std::uint32_t>(d));
    for (double v : p.value.data) w.f32(static_cast<float>(v));
  }
  w.u32(static_cast<std::uint32_t>(metadata.size()));
  w.str(metadata);
  return w.buffer();
}

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const std::string& metadata) {
  atomic_write_file(path, encode_checkpoint(params, metadata));
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes.data(), bytes.size());
  const std::string magic = r.str(sizeof(kCkptMagic));
  if (magic != std::string(kCkptMagic, sizeof(kCkptMagic)))
    r.fail("bad checkpoint magic");
  const std::uint32_t count = r.u32();
  if (count > 1u << 20) r.fail("implausible parameter count");
  Checkpoint ckpt;
  ckpt.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32();
    if (name_len == 0 || name_len > 4096) r.fail("implausible parameter name length");
    std::string name = r.str(name_len);
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 8) r.fail("implausible parameter rank");
    std::vector<int> shape(rank);
    std::int64_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint32_t dim = r.u32();
      if (dim == 0 || dim > (1u << 24)) r.fail("implausible dimension");
      shape[d] = static_cast<int>(dim);
      numel *= dim;
      if (static_cast<size_t>(numel) * 4 > bytes.size()) r.fail("dimensions exceed payload");
    }
    Tensor t(shape);
    for (std::int64_t j = 0; j < numel; ++j)
      t.data[static_cast<size_t>(j)] = static_cast<double>(r.f32());
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  const std::uint32_t meta_len = r.u32();
  if (meta_len != r.remaining()) r.fail("metadata length does not match remaining payload");
  ckpt.metadata = r.str(meta_len);
  if (!r.at_end()) r.fail("trailing bytes after checkpoint");
  return ckpt;
}

Checkpoint load_checkpoint(const std::string& path) {
  return decode_checkpoint(read_file(path));
}

void apply_checkpoint(ModelParams& params, const Checkpoint& ckpt) {
  if (static_cast<int>(ckpt.tensors.size()) != params.size())
    throw std::invalid_argument(
        "checkpoint parameter count " + std::to_string(ckpt.tensors.size()) +
        " does not match model (" + std::to_string(params.size()) +
        "); architecture mismatch");
  for (const auto& [name, tensor] : ckpt.tensors) {
    const int idx = params.find(name);
    if (idx < 0)
      throw std::invalid_argument("checkpoint parameter " + name + " unknown to this model");
    if (!tensor.same_shape(params[idx].value))
      throw std::invalid_argument("checkpoint parameter " + name + " has shape " +
                                  tensor.shape_str() + ", model expects " +
                                  params[idx].value.shape_str());
    params[idx].value = tensor;
  }
}

}  // namespace deunet
