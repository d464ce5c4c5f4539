#pragma once

#include <cstdint>
#include <vector>

#include "pel/tensor.hpp"

namespace pel {

struct AdamConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-5;  // decoupled: p -= lr * wd * p before the Adam step
};

/// Adam with decoupled weight decay over every parameter of a registry.
class Adam {
 public:
  Adam(ParameterRegistry& params, AdamConfig cfg);

  void step();
  void zero_grad() { params_.zero_grad(); }

  std::uint64_t steps() const { return steps_; }
  const AdamConfig& config() const { return cfg_; }

  // Moment buffers in registry order, for checkpointing.
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }
  void restore(std::uint64_t steps, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v);

 private:
  ParameterRegistry& params_;
  AdamConfig cfg_;
  std::uint64_t steps_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace pel
