#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dpgan/tensor.hpp"

namespace dpgan {

/// Operation kinds of the compute graph. The set is closed under
/// differentiation: every kind's vector-Jacobian product is expressed with
/// kinds from this list, so gradients are ordinary graph nodes and may be
/// differentiated again (the WGAN gradient penalty needs exactly that).
enum class OpKind : std::uint8_t {
  kConstant,
  kInput,
  kParameter,
  kAdd,
  kSubtract,
  kMultiply,  // elementwise
  kMatmul,
  kTranspose,
  kTanh,
  kSigmoid,
  kRelu,
  kStep,  // 1 if x > 0 else 0; derivative of relu, own derivative is zero
  kSoftmax,
  kMeanAll,
  kSumAll,
  kSquare,
  kSqrt,
  kReciprocal,
  kConcat,
  kSlice,
  kScale,      // multiply by a fixed scalar attribute
  kBroadcast,  // fill a target shape from a scalar
  kReshape,
};

const char* op_kind_name(OpKind kind);

using NodeId = std::uint32_t;

struct SoftmaxGroup {
  std::size_t offset = 0;
  std::size_t width = 0;
};

struct OpAttrs {
  int axis = 0;                      // concat
  std::vector<std::size_t> begin;    // slice, per axis
  std::vector<std::size_t> end;      // slice, per axis
  double scale = 1.0;                // scale
  std::vector<SoftmaxGroup> groups;  // softmax groups over the last axis; empty = whole axis
  Shape shape;                       // broadcast / reshape target
};

struct Node {
  OpKind kind;
  std::vector<NodeId> inputs;
  Shape shape;
  OpAttrs attrs;
  Tensor value;      // kConstant / kParameter only
  std::string name;  // optional diagnostic label
};

/// Append-only differentiable operation DAG. Node ids are topological by
/// construction: every node's inputs have smaller ids.
class ComputeGraph {
 public:
  NodeId constant(Tensor v, std::string name = {});
  NodeId scalar_constant(double v);
  NodeId input(Shape shape, std::string name);
  NodeId parameter(Tensor init, std::string name);
  NodeId apply(OpKind kind, std::vector<NodeId> inputs, OpAttrs attrs = {});

  std::size_t size() const { return nodes_.size(); }
  const Node& node(NodeId id) const { return nodes_[id]; }
  const std::vector<NodeId>& parameters() const { return parameters_; }
  const std::vector<NodeId>& feed_inputs() const { return inputs_; }

  Tensor& parameter_value(NodeId id);
  const Tensor& parameter_value(NodeId id) const;

  /// Emits nodes computing d(scalar)/d(wrt) for each wrt node and returns
  /// their ids, in wrt order. The scalar node must have shape {1}; every wrt
  /// node must be an ancestor of it. A wrt node whose adjoint receives no
  /// contribution (e.g. behind a zero-derivative kStep) yields a zero
  /// constant of the wrt shape.
  std::vector<NodeId> backward(NodeId scalar, std::span<const NodeId> wrt);

  /// True if `ancestor` can reach `node` along graph edges (or equals it).
  bool reaches(NodeId ancestor, NodeId node) const;

 private:
  NodeId add_node(Node n);
  [[noreturn]] void fail(OpKind kind, const std::vector<NodeId>& inputs, const std::string& what) const;
  std::string describe(NodeId id) const;

  std::vector<Node> nodes_;
  std::vector<NodeId> parameters_;
  std::vector<NodeId> inputs_;
};

/// Forward executor with a fixed schedule and reusable buffers. Construct it
/// after the graph is final (backward() extends the graph). Evaluation is a
/// pure function of (graph, bound feeds, parameter values): identical inputs
/// produce bit-identical outputs.
class Evaluator {
 public:
  Evaluator(const ComputeGraph& graph, std::vector<NodeId> outputs);

  /// Binds a feed leaf to caller-owned storage; the pointer must stay valid
  /// across run() calls. Rebinding replaces the previous source.
  void bind(NodeId input_id, const Tensor* src);

  /// Runs the schedule. Throws NumericError naming the first node whose
  /// value goes non-finite, and ConfigError for unbound feeds.
  void run();

  const Tensor& value(NodeId id) const;
  const Tensor& output(std::size_t i) const { return value(outputs_[i]); }
  const std::vector<NodeId>& outputs() const { return outputs_; }

 private:
  const ComputeGraph& graph_;
  std::vector<NodeId> outputs_;
  std::vector<NodeId> schedule_;  // ancestors of outputs, ascending
  std::vector<Tensor> buffers_;
  std::vector<const Tensor*> bound_;
  std::vector<char> in_schedule_;
};

using FeedList = std::vector<std::pair<NodeId, Tensor>>;

/// One-shot forward pass: evaluates the requested nodes under the given
/// feeds. Convenience wrapper over Evaluator for tests and small callers.
std::vector<Tensor> forward(const ComputeGraph& graph, const FeedList& feeds, std::span<const NodeId> outputs);

/// Compares backward() against central finite differences at the current
/// parameter values and the given feeds. Every wrt node must be a kParameter
/// leaf. Returns max over coordinates of
/// |analytic - central| / max(1e-8, |central|). Works on a copy of the
/// graph; the input graph and its parameters are left untouched.
double finite_difference_check(const ComputeGraph& graph, NodeId scalar, std::span<const NodeId> wrt,
                               const FeedList& feeds, double step);

}  // namespace dpgan
