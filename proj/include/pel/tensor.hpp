#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace pel {

/// Extents of a dense (batch, channel, height, width) array.
struct Dims {
  std::size_t n = 1;
  std::size_t c = 1;
  std::size_t h = 1;
  std::size_t w = 1;

  std::size_t count() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

std::string to_string(const Dims& d);

namespace detail {
// Fixed 64-byte alignment keeps vectorised kernels on the same summation
// order from run to run; with plain malloc alignment the peeled head of a
// reduction varies and results differ in the last bits.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  template <class U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

struct TensorImpl {
  Dims dims;
  Buffer data;
  Buffer grad;  // empty until a gradient is first accumulated
  bool requires_grad = false;

  Buffer& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};
}  // namespace detail

/// Dense row-major 4-D array of doubles with optional gradient tracking.
///
/// Tensor is a handle: copies share storage, which is what lets a parameter
/// registered in a network and the same parameter captured by a graph node
/// accumulate into one gradient buffer. Use clone() for a deep copy.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Dims dims, double fill = 0.0);
  Tensor(Dims dims, std::vector<double> values);

  const Dims& dims() const { return impl_->dims; }
  std::size_t size() const { return impl_->data.size(); }

  std::span<const double> data() const { return impl_->data; }
  std::span<double> data() { return impl_->data; }

  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;
  double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w);
  std::size_t index(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    const Dims& d = impl_->dims;
    return ((n * d.c + c) * d.h + h) * d.w + w;
  }

  /// Value of a single-element tensor.
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on);

  bool has_grad() const { return !impl_->grad.empty(); }
  /// Gradient buffer; zeros when nothing has been accumulated yet.
  std::vector<double> grad() const;
  std::span<double> mutable_grad() { return impl_->ensure_grad(); }
  void zero_grad();

  /// Deep copy of the values, detached from any gradient.
  Tensor clone() const;
  bool shares_storage(const Tensor& other) const { return impl_ == other.impl_; }

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Records the operations of one forward pass so they can be replayed in
/// reverse. A graph in inference mode records nothing and every result it
/// produces is gradient-free.
class Graph {
 public:
  enum class Mode { record, inference };

  explicit Graph(Mode mode = Mode::record) : mode_(mode) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  static Graph inference() { return Graph(Mode::inference); }

  bool recording() const { return mode_ == Mode::record; }

  /// True when the result of an op over `inputs` must be tracked.
  bool tracks(std::initializer_list<const Tensor*> inputs) const;

  /// Appends a node. `output` is flagged requires_grad; `backward` runs once
  /// during backward() and must read the output gradient and accumulate into
  /// the inputs it captured.
  void record(std::string op, const Tensor& output, std::function<void()> backward);

  /// Reverse-mode sweep from a (1,1,1,1) loss. Seeds d(loss)=1 and runs every
  /// node's closure in exact reverse recording order. A graph can be swept
  /// once.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  std::vector<std::string> op_names() const;

 private:
  struct Node {
    std::string op;
    std::shared_ptr<detail::TensorImpl> output;
    std::function<void()> backward;
  };

  Mode mode_;
  bool consumed_ = false;
  std::vector<Node> nodes_;
};

/// Named trainable tensor.
struct Parameter {
  std::string name;
  Tensor tensor;
};

/// Ordered, name-unique set of parameters. Registration order is the
/// checkpoint and optimizer order.
class ParameterRegistry {
 public:
  Tensor add(std::string name, Tensor tensor);

  const std::vector<Parameter>& all() const { return params_; }
  std::vector<Parameter>& all() { return params_; }
  const Parameter* find(std::string_view name) const;
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::vector<Parameter> params_;
};

}  // namespace pel
