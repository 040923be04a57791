#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dynonet/signal.hpp"

namespace dynonet::ad {

using NodeId = std::size_t;

enum class Op {
  Input,
  Parameter,
  GBlock,
  Fir,
  Affine,
  Tanh,
  Sigmoid,
  Cos,
  Abs,
  Scale,
  Mul,
  Add,
  Concat,
  Split,
  MseLoss,
};

const char* op_name(Op op);

/// What a parameter leaf is for; drives initialization.
enum class ParamRole {
  DynamicCoefficient,  // G-block / FIR coefficients or their reparametrization variables
  StaticWeight,
  StaticBias,
  Constant,
};

/// Channel and order layout of a MIMO G-block or FIR node.
///
/// Coefficient tensors are single rows laid out coefficient-major: coefficient
/// j of entry (k, h) sits at column j * outputs * inputs + k * inputs + h.
struct LtiShape {
  std::size_t inputs = 1;
  std::size_t outputs = 1;
  std::size_t nb = 0;
  std::size_t na = 0;

  std::size_t entries() const { return inputs * outputs; }
  std::size_t b_size() const { return (nb + 1) * entries(); }
  std::size_t a_size() const { return na * entries(); }
};

using Feed = std::map<std::string, TimeSeries>;

/// Static computation graph with reverse-mode differentiation.
///
/// Nodes may only consume nodes created before them, so creation order is a
/// topological order. Two kinds of value flow through the graph: time series
/// (inputs and everything computed from them, any sample count) and fixed
/// single-row tensors (parameters and scalar expressions built on them).
class Graph {
 public:
  NodeId input(std::string name, std::size_t channels);
  NodeId parameter(std::string name, std::vector<double> init, ParamRole role, bool trainable = true);

  /// MIMO G-block on `u`. `a` is ignored (and may be nullopt) when shape.na == 0.
  NodeId gblock(NodeId u, NodeId b, std::optional<NodeId> a, LtiShape shape, std::string name = {});
  /// Frozen 1/(1 - q^-1) block on every channel of `u` (diagonal operator).
  NodeId integrator(NodeId u, std::string name = {});
  NodeId fir(NodeId u, NodeId b, LtiShape shape, std::string name = {});
  /// y_t = W x_t + bias, W row-major (out x in).
  NodeId affine(NodeId x, NodeId weight, NodeId bias, std::string name = {});

  NodeId tanh(NodeId x);
  NodeId sigmoid(NodeId x);
  NodeId cos(NodeId x);
  NodeId abs(NodeId x);
  /// gain * x + offset
  NodeId scale(NodeId x, double gain, double offset = 0.0);
  NodeId mul(NodeId x, NodeId y);
  NodeId add(std::vector<NodeId> terms, std::string name = {});
  NodeId add(NodeId x, NodeId y) { return add(std::vector<NodeId>{x, y}); }
  /// Channel-wise concatenation.
  NodeId concat(std::vector<NodeId> parts, std::string name = {});
  NodeId split(NodeId x, std::size_t first, std::size_t count);
  /// Mean over all entries of the squared difference; a 1x1 value.
  NodeId mse_loss(NodeId prediction, NodeId target);

  /// Evaluates every ancestor of `target` (inclusive) in creation order.
  const TimeSeries& forward(const Feed& inputs, NodeId target);

  /// Reverse sweep from the scalar node `loss`; requires a completed forward of
  /// `loss`. Gradients of earlier passes are discarded.
  void backward(NodeId loss);

  std::size_t size() const { return nodes_.size(); }
  Op op(NodeId id) const { return node(id).op; }
  const std::string& name(NodeId id) const { return node(id).name; }
  std::size_t channels(NodeId id) const { return node(id).channels; }
  bool is_sequence(NodeId id) const { return node(id).sequence; }
  const std::vector<NodeId>& inputs_of(NodeId id) const { return node(id).inputs; }
  const LtiShape& lti_shape(NodeId id) const { return node(id).lti; }

  const TimeSeries& value(NodeId id) const;
  /// Gradient of the last backward's loss; zero-shaped like value() when the
  /// node did not take part in the sweep.
  const TimeSeries& grad(NodeId id) const;
  bool has_grad(NodeId id) const { return node(id).grad_valid; }

  std::vector<NodeId> parameters() const;
  std::vector<NodeId> trainable_parameters() const;
  std::optional<NodeId> find(const std::string& name) const;
  ParamRole role(NodeId id) const { return node(id).role; }
  bool trainable(NodeId id) const { return node(id).trainable; }
  std::size_t fan_in(NodeId id) const { return node(id).fan_in; }

  /// Overwrites a parameter leaf; the size must match.
  void set_parameter(NodeId id, std::span<const double> values);
  std::span<double> parameter_values(NodeId id);
  /// Marks all cached forward values stale (call after changing parameters
  /// outside set_parameter).
  void invalidate();

  /// Multiplies the gradient delivered to parameter `id` by `factor`.
  /// Diagnostic hook used to check that gradient verification detects errors.
  void set_gradient_fault(NodeId id, double factor);

 private:
  struct Node {
    Op op;
    std::string name;
    std::vector<NodeId> inputs;
    std::size_t channels = 0;
    bool sequence = false;
    bool trainable = false;
    bool requires_grad = false;
    ParamRole role = ParamRole::Constant;
    std::size_t fan_in = 0;
    LtiShape lti;
    double gain = 1.0;
    double offset = 0.0;
    std::size_t first = 0;
    double fault = 1.0;

    TimeSeries value;
    TimeSeries grad;
    bool value_valid = false;
    bool grad_valid = false;
    std::vector<std::vector<double>> entry_outputs;
  };

  const Node& node(NodeId id) const;
  Node& node(NodeId id);
  NodeId push(Node n);
  std::vector<bool> ancestors(NodeId target) const;
  void evaluate(Node& n, const Feed& inputs);
  void propagate(Node& n);
  void accumulate(NodeId target, const TimeSeries& g);

  std::vector<Node> nodes_;
  std::map<std::string, NodeId> names_;
};

/// Finite-difference check of every trainable parameter group.
struct GradCheckEntry {
  std::string name;
  std::size_t size = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> groups;
  double max_rel_error = 0.0;
};

/// Fourth-order central differences with step rel_step * max(1, |theta|) for each entry.
/// The error of one entry is |analytic - numeric| / max(|analytic|, |numeric|,
/// 1e-3 * group max |numeric|, 1e-12), so entries with negligible gradient
/// relative to their group are judged against the group's scale.
GradCheckReport grad_check(Graph& graph, const Feed& inputs, NodeId loss, double rel_step = 1e-3);

}  // namespace dynonet::ad
