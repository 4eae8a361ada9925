#include "drivegaze/autograd.hpp"

#include <stdexcept>
#include <unordered_set>

namespace drivegaze {

namespace detail {

void Node::accumulate(const Tensor& g) {
  if (grad.empty()) {
    grad = g;
  } else {
    grad += g;
  }
}

}  // namespace detail

namespace {
thread_local bool g_grad_enabled = true;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool NoGradGuard::grad_enabled() { return g_grad_enabled; }

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<detail::Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
  if (requires_grad) node_->grad = Tensor(node_->value.shape());
}

Tensor Var::grad() const {
  if (node_->grad.empty()) return Tensor(node_->value.shape());
  return node_->grad;
}

void Var::zero_grad() {
  if (node_->grad.empty()) {
    node_->grad = Tensor(node_->value.shape());
  } else {
    node_->grad.fill(0.0);
  }
}

Var make_result(Tensor value, std::vector<Var> parents, std::function<void(detail::Node&)> backward) {
  Var out(std::move(value), false);
  if (!NoGradGuard::grad_enabled()) return out;
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.requires_grad();
  if (!needs) return out;
  out.node_->requires_grad = true;
  out.node_->parents.reserve(parents.size());
  for (auto& p : parents) out.node_->parents.push_back(p.node());
  out.node_->backward = std::move(backward);
  return out;
}

void backward(const Var& root) {
  if (!root.valid()) throw std::invalid_argument("backward: invalid root");
  if (root.value().numel() != 1) {
    throw std::invalid_argument("backward: root must be a scalar, got shape " + shape_str(root.shape()));
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS; reversed it is a valid topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->accumulate(Tensor(root.shape(), 1.0));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (!node->backward || node->grad.empty()) continue;
    node->backward(*node);
    // Interior gradients are dead once propagated.
    node->grad = Tensor();
  }
}

namespace {

void push(const std::shared_ptr<detail::Node>& node, const Tensor& g) {
  if (node->requires_grad) node->accumulate(g);
}

}  // namespace

Var conv3d(const Var& input, const Var& weight, const Var& bias) {
  Tensor out = ops::conv3d(input.value(), weight.value(), bias.value());
  return make_result(std::move(out), {input, weight, bias}, [](detail::Node& self) {
    auto& in = self.parents[0];
    auto& w = self.parents[1];
    auto grads = ops::conv3d_backward(in->value, w->value, self.grad, in->requires_grad);
    if (in->requires_grad) push(in, grads.input);
    push(w, grads.weight);
    push(self.parents[2], grads.bias);
  });
}

Var conv2d(const Var& input, const Var& weight, const Var& bias) {
  Tensor out = ops::conv2d(input.value(), weight.value(), bias.value());
  return make_result(std::move(out), {input, weight, bias}, [](detail::Node& self) {
    auto& in = self.parents[0];
    auto& w = self.parents[1];
    auto grads = ops::conv2d_backward(in->value, w->value, self.grad, in->requires_grad);
    if (in->requires_grad) push(in, grads.input);
    push(w, grads.weight);
    push(self.parents[2], grads.bias);
  });
}

Var max_pool3d(const Var& input, ops::PoolSize pool) {
  auto result = ops::max_pool3d(input.value(), pool);
  return make_result(std::move(result.output), {input},
                     [argmax = std::move(result.argmax)](detail::Node& self) {
                       auto& in = self.parents[0];
                       push(in, ops::max_pool3d_backward(in->value.shape(), argmax, self.grad));
                     });
}

Var upsample2x(const Var& input) {
  return make_result(ops::upsample2x(input.value()), {input}, [](detail::Node& self) {
    push(self.parents[0], ops::upsample2x_backward(self.grad));
  });
}

Var relu(const Var& input) {
  return make_result(ops::relu(input.value()), {input}, [](detail::Node& self) {
    auto& in = self.parents[0];
    push(in, ops::relu_backward(in->value, self.grad));
  });
}

Var leaky_relu(const Var& input, double alpha) {
  return make_result(ops::leaky_relu(input.value(), alpha), {input}, [alpha](detail::Node& self) {
    auto& in = self.parents[0];
    push(in, ops::leaky_relu_backward(in->value, self.grad, alpha));
  });
}

Var mse(const Var& prediction, const Var& target) {
  const double loss = ops::mse(prediction.value(), target.value());
  return make_result(Tensor::scalar(loss), {prediction, target}, [](detail::Node& self) {
    auto& p = self.parents[0];
    auto& t = self.parents[1];
    Tensor g = ops::mse_backward(p->value, t->value, self.grad.item());
    if (t->requires_grad) push(t, g * -1.0);
    push(p, g);
  });
}

Var add(const Var& a, const Var& b) {
  return make_result(a.value() + b.value(), {a, b}, [](detail::Node& self) {
    push(self.parents[0], self.grad);
    push(self.parents[1], self.grad);
  });
}

Var scale(const Var& a, double factor) {
  return make_result(a.value() * factor, {a}, [factor](detail::Node& self) {
    push(self.parents[0], self.grad * factor);
  });
}

Var concat0(const Var& a, const Var& b) {
  return make_result(ops::concat0(a.value(), b.value()), {a, b}, [](detail::Node& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    const auto& g = self.grad.storage();
    const std::size_t na = pa->value.numel();
    if (pa->requires_grad) {
      push(pa, Tensor(pa->value.shape(), std::vector<double>(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(na))));
    }
    if (pb->requires_grad) {
      push(pb, Tensor(pb->value.shape(), std::vector<double>(g.begin() + static_cast<std::ptrdiff_t>(na), g.end())));
    }
  });
}

Var reshape(const Var& input, Shape shape) {
  return make_result(input.value().reshaped(std::move(shape)), {input}, [](detail::Node& self) {
    auto& in = self.parents[0];
    push(in, self.grad.reshaped(in->value.shape()));
  });
}

}  // namespace drivegaze
