#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vlcap {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One vertex of the dynamic graph. `seq` is the global creation order; since
// every node is created after its inputs, sorting reachable nodes by
// descending seq is a valid reverse-topological replay order.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::uint64_t seq = 0;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this->grad and accumulates into inputs' grads. Empty for leaves.
  std::function<void(Node&)> backward;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

// Dense row-major double tensor with optional gradient tracking. Copies are
// shallow: two Tensor handles may share one node (parameters rely on this).
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Only valid on leaves; forward values of recorded ops are immutable.
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t i) const { return data()[i]; }
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  // Same values, no history.
  Tensor detach() const;
  Tensor clone() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Replays adjoints from `loss` (numel == 1) in reverse execution order and
// accumulates d(loss)/d(leaf) into every requires_grad leaf it reaches.
// Leaf gradients accumulate across calls; call zero_grad() to reset.
void backward(const Tensor& loss);

// Thread-local switch; when off, ops record no history.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {

using BackwardFn = std::function<void(Node&)>;

// Builds an op result. History is kept only if grad mode is on and some
// input requires grad.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                   BackwardFn backward);

}  // namespace detail

}  // namespace vlcap
