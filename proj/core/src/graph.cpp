#include "dpgan/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "dpgan/error.hpp"

namespace dpgan {

const char* op_kind_name(OpKind kind) {
  switch (kind) {
    case OpKind::kConstant: return "constant";
    case OpKind::kInput: return "input";
    case OpKind::kParameter: return "parameter";
    case OpKind::kAdd: return "add";
    case OpKind::kSubtract: return "subtract";
    case OpKind::kMultiply: return "multiply";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kRelu: return "relu";
    case OpKind::kStep: return "step";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kMeanAll: return "mean";
    case OpKind::kSumAll: return "sum";
    case OpKind::kSquare: return "square";
    case OpKind::kSqrt: return "sqrt";
    case OpKind::kReciprocal: return "reciprocal";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kScale: return "scale";
    case OpKind::kBroadcast: return "broadcast";
    case OpKind::kReshape: return "reshape";
  }
  return "?";
}

std::string ComputeGraph::describe(NodeId id) const {
  const Node& n = nodes_[id];
  std::ostringstream os;
  os << "#" << id << " " << op_kind_name(n.kind);
  if (!n.name.empty()) os << " '" << n.name << "'";
  os << " " << shape_str(n.shape);
  return os.str();
}

void ComputeGraph::fail(OpKind kind, const std::vector<NodeId>& inputs, const std::string& what) const {
  std::ostringstream os;
  os << "apply(" << op_kind_name(kind) << "): " << what << "; inputs:";
  for (NodeId id : inputs) os << " " << describe(id);
  throw std::invalid_argument(os.str());
}

NodeId ComputeGraph::add_node(Node n) {
  if (nodes_.size() >= std::numeric_limits<NodeId>::max()) throw std::length_error("ComputeGraph: node limit");
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId ComputeGraph::constant(Tensor v, std::string name) {
  if (!v.all_finite()) throw NumericError("constant '" + name + "': non-finite value");
  Node n;
  n.kind = OpKind::kConstant;
  n.shape = v.shape();
  n.value = std::move(v);
  n.name = std::move(name);
  return add_node(std::move(n));
}

NodeId ComputeGraph::scalar_constant(double v) { return constant(Tensor::scalar(v)); }

NodeId ComputeGraph::input(Shape shape, std::string name) {
  Node n;
  n.kind = OpKind::kInput;
  n.shape = std::move(shape);
  n.name = std::move(name);
  NodeId id = add_node(std::move(n));
  inputs_.push_back(id);
  return id;
}

NodeId ComputeGraph::parameter(Tensor init, std::string name) {
  if (!init.all_finite()) throw NumericError("parameter '" + name + "': non-finite initial value");
  Node n;
  n.kind = OpKind::kParameter;
  n.shape = init.shape();
  n.value = std::move(init);
  n.name = std::move(name);
  NodeId id = add_node(std::move(n));
  parameters_.push_back(id);
  return id;
}

Tensor& ComputeGraph::parameter_value(NodeId id) {
  Node& n = nodes_[id];
  if (n.kind != OpKind::kParameter) throw std::invalid_argument("parameter_value: " + describe(id) + " is not a parameter");
  return n.value;
}

const Tensor& ComputeGraph::parameter_value(NodeId id) const {
  const Node& n = nodes_[id];
  if (n.kind != OpKind::kParameter) throw std::invalid_argument("parameter_value: " + describe(id) + " is not a parameter");
  return n.value;
}

namespace {

bool is_leaf(OpKind k) {
  return k == OpKind::kConstant || k == OpKind::kInput || k == OpKind::kParameter;
}

std::size_t expected_arity(OpKind k) {
  switch (k) {
    case OpKind::kAdd:
    case OpKind::kSubtract:
    case OpKind::kMultiply:
    case OpKind::kMatmul: return 2;
    case OpKind::kConcat: return 0;  // variadic, >= 1
    default: return 1;
  }
}

}  // namespace

NodeId ComputeGraph::apply(OpKind kind, std::vector<NodeId> inputs, OpAttrs attrs) {
  if (is_leaf(kind)) throw std::invalid_argument("apply: leaf kinds are created via constant/input/parameter");
  for (NodeId id : inputs) {
    if (id >= nodes_.size()) throw std::invalid_argument("apply: input id out of range");
  }
  std::size_t arity = expected_arity(kind);
  if (kind == OpKind::kConcat) {
    if (inputs.empty()) fail(kind, inputs, "needs at least one input");
  } else if (inputs.size() != arity) {
    fail(kind, inputs, "expected " + std::to_string(arity) + " inputs, got " + std::to_string(inputs.size()));
  }

  auto in_shape = [&](std::size_t i) -> const Shape& { return nodes_[inputs[i]].shape; };
  Shape out;

  switch (kind) {
    case OpKind::kAdd:
    case OpKind::kSubtract:
    case OpKind::kMultiply: {
      if (in_shape(0) != in_shape(1)) fail(kind, inputs, "operand shapes must match");
      out = in_shape(0);
      break;
    }
    case OpKind::kMatmul: {
      const Shape& a = in_shape(0);
      const Shape& b = in_shape(1);
      if (a.size() == 2 && b.size() == 2) {
        if (a[1] != b[0]) fail(kind, inputs, "inner dimensions differ");
        out = {a[0], b[1]};
      } else if (a.size() == 2 && b.size() == 1) {
        if (a[1] != b[0]) fail(kind, inputs, "inner dimensions differ");
        out = {a[0]};
      } else if (a.size() == 1 && b.size() == 2) {
        if (a[0] != b[0]) fail(kind, inputs, "inner dimensions differ");
        out = {b[1]};
      } else {
        fail(kind, inputs, "supported shapes: [m,k]x[k,n], [m,k]x[k], [k]x[k,n]");
      }
      break;
    }
    case OpKind::kTranspose: {
      if (in_shape(0).size() != 2) fail(kind, inputs, "rank-2 input required");
      out = {in_shape(0)[1], in_shape(0)[0]};
      break;
    }
    case OpKind::kTanh:
    case OpKind::kSigmoid:
    case OpKind::kRelu:
    case OpKind::kStep:
    case OpKind::kSquare:
    case OpKind::kSqrt:
    case OpKind::kReciprocal: {
      out = in_shape(0);
      break;
    }
    case OpKind::kSoftmax: {
      const Shape& s = in_shape(0);
      if (s.empty() || s.size() > 2) fail(kind, inputs, "rank-1 or rank-2 input required");
      std::size_t width = s.back();
      if (attrs.groups.empty()) attrs.groups = {{0, width}};
      std::size_t cursor = 0;
      for (const SoftmaxGroup& g : attrs.groups) {
        if (g.offset != cursor || g.width == 0) fail(kind, inputs, "groups must be nonempty, disjoint and cover the last axis");
        cursor += g.width;
      }
      if (cursor != width) fail(kind, inputs, "groups must cover the last axis (covered " + std::to_string(cursor) + " of " + std::to_string(width) + ")");
      out = s;
      break;
    }
    case OpKind::kMeanAll:
    case OpKind::kSumAll: {
      out = {1};
      break;
    }
    case OpKind::kConcat: {
      std::size_t rank = in_shape(0).size();
      if (rank == 0 || rank > 2) fail(kind, inputs, "rank-1 or rank-2 inputs required");
      if (attrs.axis < 0 || static_cast<std::size_t>(attrs.axis) >= rank) fail(kind, inputs, "axis out of range");
      out = in_shape(0);
      for (std::size_t i = 1; i < inputs.size(); ++i) {
        const Shape& s = in_shape(i);
        if (s.size() != rank) fail(kind, inputs, "rank mismatch");
        for (std::size_t d = 0; d < rank; ++d) {
          if (d == static_cast<std::size_t>(attrs.axis)) continue;
          if (s[d] != out[d]) fail(kind, inputs, "non-concat dimensions must match");
        }
        out[attrs.axis] += s[attrs.axis];
      }
      break;
    }
    case OpKind::kSlice: {
      const Shape& s = in_shape(0);
      if (attrs.begin.size() != s.size() || attrs.end.size() != s.size()) fail(kind, inputs, "begin/end must list one range per axis");
      out.resize(s.size());
      for (std::size_t d = 0; d < s.size(); ++d) {
        if (attrs.begin[d] >= attrs.end[d] || attrs.end[d] > s[d]) {
          fail(kind, inputs, "range [" + std::to_string(attrs.begin[d]) + "," + std::to_string(attrs.end[d]) + ") invalid for axis " + std::to_string(d));
        }
        out[d] = attrs.end[d] - attrs.begin[d];
      }
      break;
    }
    case OpKind::kScale: {
      if (!std::isfinite(attrs.scale)) fail(kind, inputs, "scale factor must be finite");
      out = in_shape(0);
      break;
    }
    case OpKind::kBroadcast: {
      if (shape_numel(in_shape(0)) != 1) fail(kind, inputs, "input must be a scalar");
      if (attrs.shape.empty() || shape_numel(attrs.shape) == 0) fail(kind, inputs, "target shape required");
      out = attrs.shape;
      break;
    }
    case OpKind::kReshape: {
      if (shape_numel(attrs.shape) != shape_numel(in_shape(0))) fail(kind, inputs, "element count must be preserved");
      out = attrs.shape;
      break;
    }
    default:
      fail(kind, inputs, "unsupported kind");
  }

  Node n;
  n.kind = kind;
  n.inputs = std::move(inputs);
  n.shape = std::move(out);
  n.attrs = std::move(attrs);
  return add_node(std::move(n));
}

bool ComputeGraph::reaches(NodeId ancestor, NodeId node) const {
  if (ancestor == node) return true;
  if (ancestor > node) return false;
  std::vector<char> seen(node + 1, 0);
  std::vector<NodeId> stack{node};
  seen[node] = 1;
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    for (NodeId in : nodes_[id].inputs) {
      if (in == ancestor) return true;
      if (in > ancestor && !seen[in]) {
        seen[in] = 1;
        stack.push_back(in);
      }
    }
  }
  return false;
}

std::vector<NodeId> ComputeGraph::backward(NodeId scalar, std::span<const NodeId> wrt) {
  if (scalar >= nodes_.size()) throw std::invalid_argument("backward: scalar id out of range");
  if (shape_numel(nodes_[scalar].shape) != 1) {
    throw std::invalid_argument("backward: node " + describe(scalar) + " is not scalar");
  }

  // Ancestor mask of the scalar, over pre-existing nodes only.
  std::vector<char> ancestor(scalar + 1, 0);
  ancestor[scalar] = 1;
  for (NodeId id = scalar + 1; id-- > 0;) {
    if (!ancestor[id]) continue;
    for (NodeId in : nodes_[id].inputs) ancestor[in] = 1;
  }
  for (NodeId w : wrt) {
    if (w >= nodes_.size() || w > scalar || !ancestor[w]) {
      throw std::invalid_argument("backward: wrt node " + describe(w) + " is not an ancestor of " + describe(scalar));
    }
  }

  constexpr NodeId kNone = std::numeric_limits<NodeId>::max();
  std::vector<NodeId> adj(scalar + 1, kNone);

  auto accumulate = [&](NodeId target, NodeId contrib) {
    adj[target] = (adj[target] == kNone) ? contrib : apply(OpKind::kAdd, {adj[target], contrib});
  };
  auto ones_like = [&](NodeId id) { return constant(Tensor::full(nodes_[id].shape, 1.0)); };
  auto zeros_const = [&](const Shape& s) { return constant(Tensor::zeros(s)); };

  adj[scalar] = constant(Tensor::full(nodes_[scalar].shape, 1.0));

  for (NodeId id = scalar + 1; id-- > 0;) {
    if (adj[id] == kNone) continue;
    const Node n = nodes_[id];  // copy: apply() below may reallocate nodes_
    if (is_leaf(n.kind)) continue;
    NodeId g = adj[id];

    switch (n.kind) {
      case OpKind::kAdd: {
        accumulate(n.inputs[0], g);
        accumulate(n.inputs[1], g);
        break;
      }
      case OpKind::kSubtract: {
        accumulate(n.inputs[0], g);
        accumulate(n.inputs[1], apply(OpKind::kScale, {g}, {.scale = -1.0}));
        break;
      }
      case OpKind::kMultiply: {
        accumulate(n.inputs[0], apply(OpKind::kMultiply, {g, n.inputs[1]}));
        accumulate(n.inputs[1], apply(OpKind::kMultiply, {g, n.inputs[0]}));
        break;
      }
      case OpKind::kMatmul: {
        NodeId a = n.inputs[0], b = n.inputs[1];
        const Shape& sa = nodes_[a].shape;
        const Shape& sb = nodes_[b].shape;
        if (sa.size() == 2 && sb.size() == 2) {
          accumulate(a, apply(OpKind::kMatmul, {g, apply(OpKind::kTranspose, {b})}));
          accumulate(b, apply(OpKind::kMatmul, {apply(OpKind::kTranspose, {a}), g}));
        } else if (sa.size() == 2 && sb.size() == 1) {
          NodeId g_col = apply(OpKind::kReshape, {g}, {.shape = {sa[0], 1}});
          NodeId v_row = apply(OpKind::kReshape, {b}, {.shape = {1, sb[0]}});
          accumulate(a, apply(OpKind::kMatmul, {g_col, v_row}));
          accumulate(b, apply(OpKind::kMatmul, {apply(OpKind::kTranspose, {a}), g}));
        } else {  // [k] x [k,n]
          accumulate(a, apply(OpKind::kMatmul, {g, apply(OpKind::kTranspose, {b})}));
          NodeId v_col = apply(OpKind::kReshape, {a}, {.shape = {sa[0], 1}});
          NodeId g_row = apply(OpKind::kReshape, {g}, {.shape = {1, sb[1]}});
          accumulate(b, apply(OpKind::kMatmul, {v_col, g_row}));
        }
        break;
      }
      case OpKind::kTranspose: {
        accumulate(n.inputs[0], apply(OpKind::kTranspose, {g}));
        break;
      }
      case OpKind::kTanh: {
        NodeId one = ones_like(id);
        NodeId d = apply(OpKind::kSubtract, {one, apply(OpKind::kSquare, {id})});
        accumulate(n.inputs[0], apply(OpKind::kMultiply, {g, d}));
        break;
      }
      case OpKind::kSigmoid: {
        NodeId one = ones_like(id);
        NodeId d = apply(OpKind::kMultiply, {id, apply(OpKind::kSubtract, {one, id})});
        accumulate(n.inputs[0], apply(OpKind::kMultiply, {g, d}));
        break;
      }
      case OpKind::kRelu: {
        accumulate(n.inputs[0], apply(OpKind::kMultiply, {g, apply(OpKind::kStep, {n.inputs[0]})}));
        break;
      }
      case OpKind::kStep: {
        break;  // derivative is zero almost everywhere
      }
      case OpKind::kSoftmax: {
        // per group: dx = y * (g - rowsum(g*y)); rowsum via ones matmul
        const Shape& s = n.shape;
        bool mat = s.size() == 2;
        std::size_t rows = mat ? s[0] : 0;
        std::vector<NodeId> parts;
        parts.reserve(n.attrs.groups.size());
        for (const SoftmaxGroup& grp : n.attrs.groups) {
          OpAttrs sl;
          if (mat) {
            sl.begin = {0, grp.offset};
            sl.end = {rows, grp.offset + grp.width};
          } else {
            sl.begin = {grp.offset};
            sl.end = {grp.offset + grp.width};
          }
          NodeId yg = (n.attrs.groups.size() == 1) ? id : apply(OpKind::kSlice, {id}, sl);
          NodeId gg = (n.attrs.groups.size() == 1) ? g : apply(OpKind::kSlice, {g}, sl);
          NodeId p = apply(OpKind::kMultiply, {gg, yg});
          NodeId ones_w = constant(Tensor::full({grp.width, grp.width}, 1.0));
          NodeId rowsum = apply(OpKind::kMatmul, {p, ones_w});
          parts.push_back(apply(OpKind::kMultiply, {yg, apply(OpKind::kSubtract, {gg, rowsum})}));
        }
        NodeId dx = parts.size() == 1 ? parts[0] : apply(OpKind::kConcat, parts, {.axis = mat ? 1 : 0});
        accumulate(n.inputs[0], dx);
        break;
      }
      case OpKind::kMeanAll: {
        const Shape& s = nodes_[n.inputs[0]].shape;
        NodeId b = apply(OpKind::kBroadcast, {g}, {.shape = s});
        accumulate(n.inputs[0], apply(OpKind::kScale, {b}, {.scale = 1.0 / static_cast<double>(shape_numel(s))}));
        break;
      }
      case OpKind::kSumAll: {
        accumulate(n.inputs[0], apply(OpKind::kBroadcast, {g}, {.shape = nodes_[n.inputs[0]].shape}));
        break;
      }
      case OpKind::kSquare: {
        accumulate(n.inputs[0], apply(OpKind::kMultiply, {g, apply(OpKind::kScale, {n.inputs[0]}, {.scale = 2.0})}));
        break;
      }
      case OpKind::kSqrt: {
        NodeId d = apply(OpKind::kScale, {apply(OpKind::kReciprocal, {id})}, {.scale = 0.5});
        accumulate(n.inputs[0], apply(OpKind::kMultiply, {g, d}));
        break;
      }
      case OpKind::kReciprocal: {
        NodeId d = apply(OpKind::kMultiply, {g, apply(OpKind::kSquare, {id})});
        accumulate(n.inputs[0], apply(OpKind::kScale, {d}, {.scale = -1.0}));
        break;
      }
      case OpKind::kConcat: {
        std::size_t axis = static_cast<std::size_t>(n.attrs.axis);
        std::size_t offset = 0;
        for (NodeId in : n.inputs) {
          const Shape& s = nodes_[in].shape;
          OpAttrs sl;
          sl.begin.assign(n.shape.size(), 0);
          sl.end = n.shape;
          sl.begin[axis] = offset;
          sl.end[axis] = offset + s[axis];
          accumulate(in, apply(OpKind::kSlice, {g}, sl));
          offset += s[axis];
        }
        break;
      }
      case OpKind::kSlice: {
        // pad g with zeros back to the input shape, columns first then rows
        const Shape& s = nodes_[n.inputs[0]].shape;
        NodeId padded = g;
        if (s.size() == 1) {
          std::vector<NodeId> parts;
          if (n.attrs.begin[0] > 0) parts.push_back(zeros_const({n.attrs.begin[0]}));
          parts.push_back(padded);
          if (n.attrs.end[0] < s[0]) parts.push_back(zeros_const({s[0] - n.attrs.end[0]}));
          if (parts.size() > 1) padded = apply(OpKind::kConcat, parts, {.axis = 0});
        } else {
          std::size_t slice_rows = n.attrs.end[0] - n.attrs.begin[0];
          if (n.attrs.begin[1] > 0 || n.attrs.end[1] < s[1]) {
            std::vector<NodeId> parts;
            if (n.attrs.begin[1] > 0) parts.push_back(zeros_const({slice_rows, n.attrs.begin[1]}));
            parts.push_back(padded);
            if (n.attrs.end[1] < s[1]) parts.push_back(zeros_const({slice_rows, s[1] - n.attrs.end[1]}));
            padded = apply(OpKind::kConcat, parts, {.axis = 1});
          }
          if (n.attrs.begin[0] > 0 || n.attrs.end[0] < s[0]) {
            std::vector<NodeId> parts;
            if (n.attrs.begin[0] > 0) parts.push_back(zeros_const({n.attrs.begin[0], s[1]}));
            parts.push_back(padded);
            if (n.attrs.end[0] < s[0]) parts.push_back(zeros_const({s[0] - n.attrs.end[0], s[1]}));
            padded = apply(OpKind::kConcat, parts, {.axis = 0});
          }
        }
        accumulate(n.inputs[0], padded);
        break;
      }
      case OpKind::kScale: {
        accumulate(n.inputs[0], apply(OpKind::kScale, {g}, {.scale = n.attrs.scale}));
        break;
      }
      case OpKind::kBroadcast: {
        accumulate(n.inputs[0], apply(OpKind::kSumAll, {g}));
        break;
      }
      case OpKind::kReshape: {
        accumulate(n.inputs[0], apply(OpKind::kReshape, {g}, {.shape = nodes_[n.inputs[0]].shape}));
        break;
      }
      default:
        throw std::logic_error("backward: no derivative rule for " + std::string(op_kind_name(n.kind)));
    }
  }

  std::vector<NodeId> grads;
  grads.reserve(wrt.size());
  for (NodeId w : wrt) {
    grads.push_back(adj[w] != kNone ? adj[w] : zeros_const(nodes_[w].shape));
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Evaluator

Evaluator::Evaluator(const ComputeGraph& graph, std::vector<NodeId> outputs)
    : graph_(graph), outputs_(std::move(outputs)) {
  for (NodeId id : outputs_) {
    if (id >= graph_.size()) throw std::invalid_argument("Evaluator: output id out of range");
  }
  in_schedule_.assign(graph_.size(), 0);
  std::vector<NodeId> stack(outputs_);
  for (NodeId id : outputs_) in_schedule_[id] = 1;
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    for (NodeId in : graph_.node(id).inputs) {
      if (!in_schedule_[in]) {
        in_schedule_[in] = 1;
        stack.push_back(in);
      }
    }
  }
  schedule_.reserve(graph_.size());
  for (NodeId id = 0; id < graph_.size(); ++id) {
    if (in_schedule_[id]) schedule_.push_back(id);
  }
  buffers_.resize(graph_.size());
  bound_.assign(graph_.size(), nullptr);
  for (NodeId id : schedule_) {
    const Node& n = graph_.node(id);
    if (n.kind != OpKind::kConstant && n.kind != OpKind::kParameter && n.kind != OpKind::kInput) {
      buffers_[id] = Tensor(n.shape);
    }
  }
}

void Evaluator::bind(NodeId input_id, const Tensor* src) {
  if (input_id >= graph_.size() || graph_.node(input_id).kind != OpKind::kInput) {
    throw std::invalid_argument("Evaluator::bind: node is not a feed input");
  }
  bound_[input_id] = src;
}

const Tensor& Evaluator::value(NodeId id) const {
  if (id >= graph_.size() || !in_schedule_[id]) throw std::logic_error("Evaluator::value: node not scheduled");
  const Node& n = graph_.node(id);
  switch (n.kind) {
    case OpKind::kConstant:
    case OpKind::kParameter: return n.value;
    case OpKind::kInput:
      if (!bound_[id]) throw ConfigError("Evaluator: input '" + n.name + "' not bound");
      return *bound_[id];
    default: return buffers_[id];
  }
}

namespace {

void matmul_kernel(const Tensor& a, const Tensor& b, Tensor& out) {
  if (a.rank() == 2 && b.rank() == 2) {
    std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    double* o = out.data();
    std::fill(o, o + m * n, 0.0);
    const double* ad = a.data();
    const double* bd = b.data();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        double av = ad[i * k + p];
        if (av == 0.0) continue;
        const double* brow = bd + p * n;
        double* orow = o + i * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
      }
    }
  } else if (a.rank() == 2 && b.rank() == 1) {
    std::size_t m = a.rows(), k = a.cols();
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      const double* arow = a.data() + i * k;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * b[p];
      out[i] = s;
    }
  } else {  // [k] x [k,n]
    std::size_t k = a.size(), n = b.cols();
    double* o = out.data();
    std::fill(o, o + n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      double av = a[p];
      if (av == 0.0) continue;
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += av * brow[j];
    }
  }
}

void softmax_rows(const double* in, double* out, std::size_t rows, std::size_t width,
                  const std::vector<SoftmaxGroup>& groups) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in + r * width;
    double* y = out + r * width;
    for (const SoftmaxGroup& g : groups) {
      double mx = x[g.offset];
      for (std::size_t j = 1; j < g.width; ++j) mx = std::max(mx, x[g.offset + j]);
      double sum = 0.0;
      for (std::size_t j = 0; j < g.width; ++j) {
        double e = std::exp(x[g.offset + j] - mx);
        y[g.offset + j] = e;
        sum += e;
      }
      for (std::size_t j = 0; j < g.width; ++j) y[g.offset + j] /= sum;
    }
  }
}

}  // namespace

void Evaluator::run() {
  for (NodeId id : schedule_) {
    const Node& n = graph_.node(id);
    switch (n.kind) {
      case OpKind::kConstant:
        continue;  // validated at creation
      case OpKind::kInput: {
        if (!bound_[id]) throw ConfigError("forward: missing feed for input '" + n.name + "' (#" + std::to_string(id) + ")");
        if (bound_[id]->shape() != n.shape) {
          throw std::invalid_argument("forward: feed for '" + n.name + "' has shape " + shape_str(bound_[id]->shape()) +
                                      ", declared " + shape_str(n.shape));
        }
        if (!bound_[id]->all_finite()) {
          throw NumericError("forward: non-finite value at node #" + std::to_string(id) + " (input '" + n.name + "')");
        }
        continue;
      }
      case OpKind::kParameter: {
        if (!n.value.all_finite()) {
          throw NumericError("forward: non-finite value at node #" + std::to_string(id) + " (parameter '" + n.name + "')");
        }
        continue;
      }
      default:
        break;
    }

    Tensor& out = buffers_[id];
    auto in = [&](std::size_t i) -> const Tensor& { return value(n.inputs[i]); };

    switch (n.kind) {
      case OpKind::kAdd: {
        const Tensor &a = in(0), &b = in(1);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
        break;
      }
      case OpKind::kSubtract: {
        const Tensor &a = in(0), &b = in(1);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
        break;
      }
      case OpKind::kMultiply: {
        const Tensor &a = in(0), &b = in(1);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
        break;
      }
      case OpKind::kMatmul:
        matmul_kernel(in(0), in(1), out);
        break;
      case OpKind::kTranspose: {
        const Tensor& a = in(0);
        std::size_t m = a.rows(), c = a.cols();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < c; ++j) out.data()[j * m + i] = a.data()[i * c + j];
        break;
      }
      case OpKind::kTanh: {
        const Tensor& a = in(0);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a[i]);
        break;
      }
      case OpKind::kSigmoid: {
        const Tensor& a = in(0);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-a[i]));
        break;
      }
      case OpKind::kRelu: {
        const Tensor& a = in(0);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
        break;
      }
      case OpKind::kStep: {
        const Tensor& a = in(0);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] > 0.0 ? 1.0 : 0.0;
        break;
      }
      case OpKind::kSoftmax: {
        const Tensor& a = in(0);
        std::size_t width = a.shape().back();
        std::size_t rows = a.size() / width;
        softmax_rows(a.data(), out.data(), rows, width, n.attrs.groups);
        break;
      }
      case OpKind::kMeanAll: {
        const Tensor& a = in(0);
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
        out[0] = s / static_cast<double>(a.size());
        break;
      }
      case OpKind::kSumAll: {
        const Tensor& a = in(0);
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
        out[0] = s;
        break;
      }
      case OpKind::kSquare: {
        const Tensor& a = in(0);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * a[i];
        break;
      }
      case OpKind::kSqrt: {
        const Tensor& a = in(0);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(a[i]);
        break;
      }
      case OpKind::kReciprocal: {
        const Tensor& a = in(0);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / a[i];
        break;
      }
      case OpKind::kConcat: {
        if (n.attrs.axis == 0 || n.shape.size() == 1) {
          double* dst = out.data();
          for (std::size_t i = 0; i < n.inputs.size(); ++i) {
            const Tensor& a = in(i);
            std::memcpy(dst, a.data(), a.size() * sizeof(double));
            dst += a.size();
          }
        } else {
          std::size_t rows = n.shape[0], width = n.shape[1];
          std::size_t col = 0;
          for (std::size_t i = 0; i < n.inputs.size(); ++i) {
            const Tensor& a = in(i);
            std::size_t c = a.cols();
            for (std::size_t r = 0; r < rows; ++r) {
              std::memcpy(out.data() + r * width + col, a.data() + r * c, c * sizeof(double));
            }
            col += c;
          }
        }
        break;
      }
      case OpKind::kSlice: {
        const Tensor& a = in(0);
        if (a.rank() == 1) {
          std::memcpy(out.data(), a.data() + n.attrs.begin[0], out.size() * sizeof(double));
        } else {
          std::size_t c = a.cols(), w = n.shape[1];
          for (std::size_t r = 0; r < n.shape[0]; ++r) {
            std::memcpy(out.data() + r * w, a.data() + (r + n.attrs.begin[0]) * c + n.attrs.begin[1], w * sizeof(double));
          }
        }
        break;
      }
      case OpKind::kScale: {
        const Tensor& a = in(0);
        double c = n.attrs.scale;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * a[i];
        break;
      }
      case OpKind::kBroadcast: {
        double v = in(0)[0];
        std::fill(out.data(), out.data() + out.size(), v);
        break;
      }
      case OpKind::kReshape: {
        std::memcpy(out.data(), in(0).data(), out.size() * sizeof(double));
        break;
      }
      default:
        throw std::logic_error("forward: unexpected kind");
    }

    if (!out.all_finite()) {
      throw NumericError("forward: non-finite value at node #" + std::to_string(id) + " (" + op_kind_name(n.kind) +
                         (n.name.empty() ? std::string() : " '" + n.name + "'") + ")");
    }
  }
}

std::vector<Tensor> forward(const ComputeGraph& graph, const FeedList& feeds, std::span<const NodeId> outputs) {
  Evaluator ev(graph, std::vector<NodeId>(outputs.begin(), outputs.end()));
  for (const auto& [id, t] : feeds) ev.bind(id, &t);
  ev.run();
  std::vector<Tensor> result;
  result.reserve(outputs.size());
  for (NodeId id : outputs) result.push_back(ev.value(id));
  return result;
}

double finite_difference_check(const ComputeGraph& graph0, NodeId scalar, std::span<const NodeId> wrt,
                               const FeedList& feeds, double step) {
  if (step <= 0.0) throw std::invalid_argument("finite_difference_check: step must be positive");
  ComputeGraph graph = graph0;
  for (NodeId w : wrt) {
    if (graph.node(w).kind != OpKind::kParameter) {
      throw std::invalid_argument("finite_difference_check: wrt nodes must be parameter leaves");
    }
  }
  std::vector<NodeId> grads = graph.backward(scalar, wrt);

  Evaluator grad_ev(graph, grads);
  Evaluator scalar_ev(graph, {scalar});
  for (const auto& [id, t] : feeds) {
    grad_ev.bind(id, &t);
    scalar_ev.bind(id, &t);
  }
  grad_ev.run();
  std::vector<Tensor> analytic;
  analytic.reserve(grads.size());
  for (NodeId gid : grads) analytic.push_back(grad_ev.value(gid));

  double max_rel = 0.0;
  for (std::size_t wi = 0; wi < wrt.size(); ++wi) {
    Tensor& pv = graph.parameter_value(wrt[wi]);
    for (std::size_t c = 0; c < pv.size(); ++c) {
      double orig = pv[c];
      pv[c] = orig + step;
      scalar_ev.run();
      double fp = scalar_ev.value(scalar)[0];
      pv[c] = orig - step;
      scalar_ev.run();
      double fm = scalar_ev.value(scalar)[0];
      pv[c] = orig;
      double central = (fp - fm) / (2.0 * step);
      double rel = std::abs(analytic[wi][c] - central) / std::max(1e-8, std::abs(central));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace dpgan
