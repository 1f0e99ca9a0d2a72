// Dense row-major tensor and the deterministic RNG used across the library.
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace deunet {

// Dense tensor of doubles, row-major, explicit shape. No broadcasting; every
// op checks the shapes it consumes. Double precision throughout so the
// finite-difference checks are meaningful; values cross to float32 only at
// serialization boundaries.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int> s, double v);

  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }

  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }

  double& at(int i) { return data[static_cast<size_t>(i)]; }
  double at(int i) const { return data[static_cast<size_t>(i)]; }
  double& at(int i, int j) { return data[static_cast<size_t>(i) * dim(1) + j]; }
  double at(int i, int j) const { return data[static_cast<size_t>(i) * dim(1) + j]; }
  double& at(int i, int j, int k) {
    return data[(static_cast<size_t>(i) * dim(1) + j) * dim(2) + k];
  }
  double at(int i, int j, int k) const {
    return data[(static_cast<size_t>(i) * dim(1) + j) * dim(2) + k];
  }
  double& at(int i, int j, int k, int l) {
    return data[((static_cast<size_t>(i) * dim(1) + j) * dim(2) + k) * dim(3) + l];
  }
  double at(int i, int j, int k, int l) const {
    return data[((static_cast<size_t>(i) * dim(1) + j) * dim(2) + k) * dim(3) + l];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
  std::string shape_str() const;
};

// y += a * x (shapes must match)
void axpy(double a, const Tensor& x, Tensor& y);
// elementwise in-place scale
void scale(Tensor& x, double a);
double max_abs_diff(const Tensor& a, const Tensor& b);

// Deterministic RNG. mt19937_64 supplies the bits; the value mappings are
// spelled out here instead of std::*_distribution so that a (seed, salt)
// pair produces the same stream on every platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64() { return gen_(); }
  // [0, 1)
  double uniform();
  double uniform(double lo, double hi);
  // standard normal, Box-Muller
  double normal();
  // [0, n)
  int uniform_int(int n);
  // independent child stream; same (seed, salt) -> same child everywhere
  Rng fork(std::uint64_t salt) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

void fill_uniform(Tensor& t, Rng& rng, double lo, double hi);
void fill_normal(Tensor& t, Rng& rng, double sigma = 1.0);

}  // namespace deunet
