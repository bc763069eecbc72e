#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace rpmlab {

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ')';
  return os.str();
}

namespace detail {

// One node of the reverse-mode tape. Children hold shared_ptr references to
// their inputs, so the graph is acyclic by construction and a backward pass
// is a reverse traversal of creation order within the reachable subgraph.
template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // sized on demand, zeroed at the start of backward
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node<T>>> parents;
  // Reads this->grad and accumulates into parents' grad.
  std::function<void(Node<T>&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

}  // namespace detail

template <typename T>
class Tensor {
 public:
  using NodePtr = std::shared_ptr<detail::Node<T>>;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return filled(std::move(shape), T(0), requires_grad);
  }

  static Tensor filled(Shape shape, T fill, bool requires_grad = false) {
    auto n = std::make_shared<detail::Node<T>>();
    n->value.assign(static_cast<size_t>(shape_numel(shape)), fill);
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor from_data(Shape shape, std::vector<T> data, bool requires_grad = false) {
    if (shape_numel(shape) != static_cast<int64_t>(data.size()))
      throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                  " does not match shape " + shape_str(shape));
    auto n = std::make_shared<detail::Node<T>>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t numel() const { return static_cast<int64_t>(node_->value.size()); }
  bool requires_grad() const { return node_->requires_grad; }

  const std::vector<T>& value() const { return node_->value; }
  std::vector<T>& value() { return node_->value; }

  const std::vector<T>& grad() const {
    node_->ensure_grad();
    return node_->grad;
  }

  T item() const {
    if (numel() != 1)
      throw std::invalid_argument("item() on non-scalar tensor of shape " + shape_str(shape()));
    return node_->value[0];
  }

  const char* op() const { return node_->op; }

  // Reverse-mode pass from a scalar. Gradient accumulators of every node in
  // the reachable subgraph are zeroed first, then each node is visited exactly
  // once in reverse topological order.
  void backward() const {
    if (numel() != 1)
      throw std::invalid_argument("backward() requires a scalar loss, got shape " +
                                  shape_str(shape()));
    std::vector<detail::Node<T>*> order;
    std::unordered_set<detail::Node<T>*> seen;
    topo_visit(node_.get(), seen, order);
    for (auto* n : order)
      if (n->requires_grad) {
        n->ensure_grad();
        std::fill(n->grad.begin(), n->grad.end(), T(0));
      }
    node_->ensure_grad();
    node_->grad[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      auto* n = *it;
      if (n->requires_grad && n->backward_fn) n->backward_fn(*n);
    }
  }

  NodePtr node() const { return node_; }
  explicit Tensor(NodePtr n) : node_(std::move(n)) {}

 private:
  static void topo_visit(detail::Node<T>* root, std::unordered_set<detail::Node<T>*>& seen,
                         std::vector<detail::Node<T>*>& order) {
    // Iterative DFS postorder; recursion would overflow on long graphs.
    struct Frame {
      detail::Node<T>* node;
      size_t next_parent;
    };
    std::vector<Frame> stack;
    if (seen.insert(root).second) stack.push_back({root, 0});
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next_parent < f.node->parents.size()) {
        auto* p = f.node->parents[f.next_parent++].get();
        if (seen.insert(p).second) stack.push_back({p, 0});
      } else {
        order.push_back(f.node);
        stack.pop_back();
      }
    }
  }

  NodePtr node_;
};

namespace detail {

// Builds a result node wired to its inputs. Gradients flow only toward
// inputs that require them.
template <typename T>
Tensor<T> make_op(const char* op, Shape shape, std::vector<T> value,
                  std::vector<typename Tensor<T>::NodePtr> parents,
                  std::function<void(Node<T>&)> backward_fn) {
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->op = op;
  for (auto& p : parents)
    if (p->requires_grad) n->requires_grad = true;
  n->parents = std::move(parents);
  if (n->requires_grad) n->backward_fn = std::move(backward_fn);
  return Tensor<T>(std::move(n));
}

}  // namespace detail

}  // namespace rpmlab
