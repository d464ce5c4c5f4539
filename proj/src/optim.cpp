#include "pel/optim.hpp"

#include <cmath>

#include "pel/errors.hpp"

namespace pel {

Adam::Adam(ParameterRegistry& params, AdamConfig cfg) : params_(params), cfg_(cfg) {
  for (const auto& p : params_.all()) {
    m_.emplace_back(p.tensor.size(), 0.0);
    v_.emplace_back(p.tensor.size(), 0.0);
  }
}

void Adam::step() {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double bias1 = 1.0 - std::pow(cfg_.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg_.beta2, t);
  auto& params = params_.all();
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = params[k].tensor;
    if (!p.has_grad()) continue;
    auto values = p.data();
    const auto grad = p.mutable_grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      values[i] -= cfg_.learning_rate * cfg_.weight_decay * values[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * grad[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      values[i] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
    }
  }
}

void Adam::restore(std::uint64_t steps, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v) {
  const auto& params = params_.all();
  if (m.size() != params.size() || v.size() != params.size()) throw LoadError("optimizer state does not match parameters");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (m[k].size() != params[k].tensor.size() || v[k].size() != params[k].tensor.size()) {
      throw LoadError("optimizer state size mismatch for '" + params[k].name + "'");
    }
  }
  steps_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace pel
