#include "vlcap/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

#include "vlcap/errors.hpp"

namespace vlcap {

namespace {

std::atomic<std::uint64_t> g_next_seq{1};
thread_local bool t_grad_enabled = true;

std::shared_ptr<detail::Node> new_node(Shape shape, std::vector<double> values,
                                       bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor: shape " + shape_str(shape) + " holds " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  node->seq = g_next_seq.fetch_add(1, std::memory_order_relaxed);
  return node;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(new_node(std::move(shape), std::move(values), requires_grad)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw ContractError("tensor: use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("tensor: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<const double> Tensor::data() const {
  shape();
  return node_->value;
}

std::span<double> Tensor::mutable_data() {
  if (!is_leaf()) throw ContractError("tensor: mutable_data() on a non-leaf tensor");
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("tensor: item() on tensor of shape " + shape_str(shape()));
  }
  return node_->value[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2) throw DimensionError("tensor: 2-D access on " + shape_str(shape()));
  return node_->value[row * node_->shape[1] + col];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::is_leaf() const { return node_ && !node_->backward; }

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  shape();
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->value, false); }

Tensor Tensor::clone() const { return Tensor(shape(), node_->value, requires_grad()); }

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward: loss must be a scalar tensor, got " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  }
  if (!loss.requires_grad()) return;

  // The tape: every node reachable from the loss that carries gradient.
  std::vector<detail::Node*> tape;
  std::unordered_set<detail::Node*> seen;
  std::vector<detail::Node*> stack{loss.node().get()};
  seen.insert(stack.back());
  while (!stack.empty()) {
    auto* n = stack.back();
    stack.pop_back();
    tape.push_back(n);
    for (auto& in : n->inputs) {
      if (in->requires_grad && seen.insert(in.get()).second) stack.push_back(in.get());
    }
  }
  std::sort(tape.begin(), tape.end(),
            [](const detail::Node* a, const detail::Node* b) { return a->seq > b->seq; });

  for (auto* n : tape) {
    if (n->backward) n->grad.clear();
  }
  loss.node()->grad_buffer()[0] += 1.0;

  for (auto* n : tape) {
    if (!n->backward || n->grad.empty()) continue;
    n->backward(*n);
    n->grad.clear();
    n->grad.shrink_to_fit();
  }
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }

NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

namespace detail {

Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                   BackwardFn backward) {
  bool track = false;
  if (t_grad_enabled) {
    for (const auto& in : inputs) track = track || in.requires_grad();
  }
  auto node = new_node(std::move(shape), std::move(value), track);
  if (track) {
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) node->inputs.push_back(in.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

}  // namespace detail

}  // namespace vlcap
