#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "drivegaze/ops.hpp"
#include "drivegaze/tensor.hpp"

namespace drivegaze {

namespace detail {

struct Node {
  Tensor value;
  Tensor grad;  // empty until a gradient flows in (parameters: allocated eagerly)
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void accumulate(const Tensor& g);
};

}  // namespace detail

/// Handle to a value on the reverse-mode tape. Copies share the same node, so
/// two streams that use the same parameter Var accumulate into one gradient.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  static Var constant(Tensor value) { return Var(std::move(value), false); }
  static Var parameter(Tensor value) { return Var(std::move(value), true); }

  bool valid() const noexcept { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  /// Direct access for optimizers; never call while a graph using it is live.
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }

  bool requires_grad() const { return node_->requires_grad; }
  /// Accumulated gradient; a zero tensor when nothing has flowed in.
  Tensor grad() const;
  void zero_grad();

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  bool same_node(const Var& other) const { return node_ == other.node_; }

 private:
  friend Var make_result(Tensor value, std::vector<Var> parents, std::function<void(detail::Node&)> backward);
  std::shared_ptr<detail::Node> node_;
};

/// Disables tape recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool grad_enabled();

 private:
  bool previous_;
};

/// Runs reverse-mode accumulation from a single-element root into every
/// reachable node that requires a gradient. Throws std::invalid_argument for
/// a root with more than one element.
void backward(const Var& root);

Var conv3d(const Var& input, const Var& weight, const Var& bias);
Var conv2d(const Var& input, const Var& weight, const Var& bias);
Var max_pool3d(const Var& input, ops::PoolSize pool);
Var upsample2x(const Var& input);
Var relu(const Var& input);
Var leaky_relu(const Var& input, double alpha);
Var mse(const Var& prediction, const Var& target);
Var add(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var concat0(const Var& a, const Var& b);
Var reshape(const Var& input, Shape shape);

}  // namespace drivegaze
