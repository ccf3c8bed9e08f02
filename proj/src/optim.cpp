#include "bevfuse/optim.hpp"

#include <cmath>

namespace bevfuse {

Tensor ParamStore::make(const std::string& name, Shape shape,
                        const std::function<double(Rng&)>& init, Rng& rng) {
  int64_t n = shape_numel(shape);
  std::vector<double> v(static_cast<size_t>(n));
  for (auto& x : v) x = init(rng);
  Tensor t = Tensor::from_vector(std::move(shape), std::move(v), true);
  entries_.push_back({name, t});
  return t;
}

Tensor ParamStore::make_zeros(const std::string& name, Shape shape) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  entries_.push_back({name, t});
  return t;
}

Tensor ParamStore::make_full(const std::string& name, Shape shape,
                             double value) {
  Tensor t = Tensor::full(std::move(shape), value, true);
  entries_.push_back({name, t});
  return t;
}

Tensor ParamStore::find(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.tensor;
  throw Error("no such parameter: " + name);
}

int64_t ParamStore::total_size() const {
  int64_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

void adamw_step(std::vector<ParamStore::Entry>& params, AdamWState& state,
                const AdamWConfig& cfg) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(static_cast<size_t>(params[i].tensor.numel()), 0.0);
      state.v[i].assign(static_cast<size_t>(params[i].tensor.numel()), 0.0);
    }
  }
  if (state.m.size() != params.size())
    throw ShapeMismatch("optimizer state does not match parameter list");
  state.step += 1;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& t = params[i].tensor;
    if (state.m[i].size() != static_cast<size_t>(t.numel()))
      throw ShapeMismatch("optimizer moment size mismatch for " +
                          params[i].name);
    auto vals = t.values();
    auto g = t.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (size_t j = 0; j < vals.size(); ++j) {
      double gj = j < g.size() ? g[j] : 0.0;
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
      double mhat = m[j] / bc1;
      double vhat = v[j] / bc2;
      double prev = vals[j];
      vals[j] = prev - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps) -
                cfg.lr * cfg.weight_decay * prev;
    }
  }
}

LrSchedule constant_with_warmup(double lr, int64_t warmup_steps) {
  return [lr, warmup_steps](int64_t step) {
    if (warmup_steps <= 0 || step >= warmup_steps) return lr;
    return lr * static_cast<double>(step + 1) /
           static_cast<double>(warmup_steps);
  };
}

std::function<double(Rng&)> uniform_init(double lo, double hi) {
  return [lo, hi](Rng& rng) { return rng.uniform(lo, hi); };
}

std::function<double(Rng&)> normal_init(double stddev) {
  return [stddev](Rng& rng) { return rng.normal(0.0, stddev); };
}

double xavier_bound(int64_t fan_in, int64_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace bevfuse
