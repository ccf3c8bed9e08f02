#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bevfuse/rng.hpp"
#include "bevfuse/tensor.hpp"

namespace bevfuse {

// Named trainable tensors; registration order is the checkpoint order.
class ParamStore {
 public:
  Tensor make(const std::string& name, Shape shape,
              const std::function<double(Rng&)>& init, Rng& rng);
  Tensor make_zeros(const std::string& name, Shape shape);
  Tensor make_full(const std::string& name, Shape shape, double value);

  struct Entry {
    std::string name;
    Tensor tensor;
  };
  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  Tensor find(const std::string& name) const;
  int64_t total_size() const;
  void zero_grads();

 private:
  std::vector<Entry> entries_;
};

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct AdamWState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  int64_t step = 0;
};

// Decoupled-weight-decay update. Missing grads are treated as zero, so a
// decayed parameter still shrinks by (1 - lr * wd).
void adamw_step(std::vector<ParamStore::Entry>& params, AdamWState& state,
                const AdamWConfig& cfg);

// fixed LR with optional linear warmup; pluggable in the trainer
using LrSchedule = std::function<double(int64_t step)>;
LrSchedule constant_with_warmup(double lr, int64_t warmup_steps);

// init helpers
std::function<double(Rng&)> uniform_init(double lo, double hi);
std::function<double(Rng&)> normal_init(double stddev);
double xavier_bound(int64_t fan_in, int64_t fan_out);

}  // namespace bevfuse
