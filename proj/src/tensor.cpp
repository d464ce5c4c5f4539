#include "pel/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "pel/errors.hpp"

namespace pel {

std::string to_string(const Dims& d) { return fmt::format("({}, {}, {}, {})", d.n, d.c, d.h, d.w); }

Tensor::Tensor() : impl_(std::make_shared<detail::TensorImpl>()) {
  impl_->dims = Dims{0, 0, 0, 0};
}

Tensor::Tensor(Dims dims, double fill) : impl_(std::make_shared<detail::TensorImpl>()) {
  impl_->dims = dims;
  impl_->data.assign(dims.count(), fill);
}

Tensor::Tensor(Dims dims, std::vector<double> values) : impl_(std::make_shared<detail::TensorImpl>()) {
  if (values.size() != dims.count()) {
    throw ShapeError(fmt::format("tensor {} needs {} values, got {}", to_string(dims), dims.count(), values.size()));
  }
  impl_->dims = dims;
  impl_->data.assign(values.begin(), values.end());
}

double Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
  return impl_->data[index(n, c, h, w)];
}

double& Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
  return impl_->data[index(n, c, h, w)];
}

double Tensor::item() const {
  if (impl_->data.size() != 1) {
    throw ShapeError("item() on tensor " + to_string(impl_->dims));
  }
  return impl_->data[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  return *this;
}

std::vector<double> Tensor::grad() const {
  if (impl_->grad.empty()) return std::vector<double>(impl_->data.size(), 0.0);
  return {impl_->grad.begin(), impl_->grad.end()};
}

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  Tensor copy;
  copy.impl_->dims = impl_->dims;
  copy.impl_->data = impl_->data;
  return copy;
}

bool Graph::tracks(std::initializer_list<const Tensor*> inputs) const {
  if (!recording()) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t != nullptr && t->requires_grad(); });
}

void Graph::record(std::string op, const Tensor& output, std::function<void()> backward) {
  if (!recording()) throw UsageError("cannot record '" + op + "' on an inference graph");
  if (consumed_) throw UsageError("cannot record '" + op + "' after backward()");
  output.impl()->requires_grad = true;
  nodes_.push_back(Node{std::move(op), output.impl(), std::move(backward)});
}

void Graph::backward(const Tensor& loss) {
  if (loss.dims() != Dims{1, 1, 1, 1}) {
    throw UsageError("backward() needs a scalar loss, got " + to_string(loss.dims()));
  }
  if (consumed_) throw UsageError("backward() already ran on this graph");
  if (!loss.requires_grad()) throw UsageError("loss does not depend on any tracked tensor");
  consumed_ = true;
  loss.impl()->ensure_grad()[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // nothing flowed into this node
    it->backward();
  }
}

std::vector<std::string> Graph::op_names() const {
  std::vector<std::string> names;
  names.reserve(nodes_.size());
  for (const auto& node : nodes_) names.push_back(node.op);
  return names;
}

Tensor ParameterRegistry::add(std::string name, Tensor tensor) {
  if (name.empty()) throw ConfigError("parameter name must be non-empty");
  if (find(name) != nullptr) throw ConfigError("duplicate parameter name '" + name + "'");
  tensor.set_requires_grad(true);
  params_.push_back(Parameter{std::move(name), tensor});
  return tensor;
}

const Parameter* ParameterRegistry::find(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::size_t ParameterRegistry::scalar_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.tensor.size();
  return total;
}

void ParameterRegistry::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

}  // namespace pel
