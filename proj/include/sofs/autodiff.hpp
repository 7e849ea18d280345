#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sofs/tensor.hpp"

namespace sofs {

class Graph;

// Handle to a node inside one Graph. Cheap to copy; only valid together
// with the graph that produced it.
struct Var {
  Graph* g = nullptr;
  int id = -1;
  bool valid() const { return g != nullptr && id >= 0; }
};

// Reverse-mode tape over binary32 tensors. Nodes are appended in forward
// evaluation order, which is a topological order by construction; backward
// walks the node list once in reverse. A graph is confined to one thread.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var leaf(Tensor value, bool requires_grad, std::string name = {});
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // -- differentiable operations --
  Var matmul(Var a, Var b);
  Var matmul_nt(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var scale(Var a, float s);
  Var add_scalar(Var a, float s);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var lognat(Var a);
  Var clamp_min(Var a, float lo);
  Var clamp(Var a, float lo, float hi);
  Var softmax_axis(Var a, int axis, float temperature);
  Var l2_normalize_rows(Var a, float epsilon);
  Var sum_all(Var a);
  Var mean_all(Var a);
  Var rowmax(Var a);
  Var reshape(Var a, std::vector<int> shape);
  Var concat_rows(const std::vector<Var>& parts);
  Var concat_cols(const std::vector<Var>& parts);
  Var slice_cols(Var a, int c0, int c1);
  Var broadcast_row(Var v, int n);
  Var scale_rows(Var a, Tensor row_weights);  // weights are constants
  Var conv2d(Var x, Var w, Var b, int stride, int pad);
  Var avg_pool2(Var x);
  Var resample_nearest(Var x, int Ho, int Wo);
  Var upsample_bilinear(Var x, int Ho, int Wo);

  const Tensor& value(Var v) const { return nodes_[static_cast<size_t>(v.id)]->value; }
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[static_cast<size_t>(v.id)]->requires_grad; }

  // Populates gradients of every requires-grad node reachable from `loss`,
  // which must be scalar-valued. Each node's backward rule fires exactly
  // once. Gradients from a previous backward call are discarded.
  void backward(Var loss);

  // Named requires-grad leaves and their gradients (after backward()).
  std::vector<std::pair<std::string, const Tensor*>> gradient_map() const;

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool is_leaf = false;
    const char* op = "";
    std::string name;
    std::vector<int> parents;
    std::function<void(Graph&, int)> backprop;
  };

  friend struct TapeBackend;

  Node& node(int id) { return *nodes_[static_cast<size_t>(id)]; }
  const Node& node(int id) const { return *nodes_[static_cast<size_t>(id)]; }
  Tensor& grad_ref(int id) { return node(id).grad; }
  void accumulate(int id, const Tensor& g);
  Var emit(Tensor value, const char* op, std::vector<int> parents,
           std::function<void(Graph&, int)> backprop);
  Var check(Var v) const;

  std::vector<std::unique_ptr<Node>> nodes_;
};

}  // namespace sofs
