#include "dynonet/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dynonet/lti.hpp"
#include "dynonet/static_layers.hpp"

namespace dynonet::ad {

const char* op_name(Op op) {
  switch (op) {
    case Op::Input: return "input";
    case Op::Parameter: return "parameter";
    case Op::GBlock: return "gblock";
    case Op::Fir: return "fir";
    case Op::Affine: return "affine";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::Cos: return "cos";
    case Op::Abs: return "abs";
    case Op::Scale: return "scale";
    case Op::Mul: return "mul";
    case Op::Add: return "add";
    case Op::Concat: return "concat";
    case Op::Split: return "split";
    case Op::MseLoss: return "mse_loss";
  }
  return "?";
}

namespace {

double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Builds the MIMO operator of a G-block / FIR node from its coefficient rows.
lti::MimoOperator make_operator(const LtiShape& shape, const TimeSeries& b, const TimeSeries* a) {
  const std::size_t n = shape.entries();
  std::vector<TransferFunction> entries(n);
  for (std::size_t e = 0; e < n; ++e) {
    auto& tf = entries[e];
    tf.b.resize(shape.nb + 1);
    for (std::size_t j = 0; j <= shape.nb; ++j) tf.b[j] = b(0, j * n + e);
    tf.a.resize(shape.na);
    for (std::size_t j = 0; j < shape.na; ++j) tf.a[j] = (*a)(0, j * n + e);
  }
  return lti::MimoOperator(shape.outputs, shape.inputs, std::move(entries));
}

// Inverse of the layout above for per-entry gradient vectors.
TimeSeries gather_coefficients(const std::vector<std::vector<double>>& per_entry, std::size_t order) {
  const std::size_t n = per_entry.size();
  TimeSeries row(1, order * n);
  for (std::size_t e = 0; e < n; ++e) {
    for (std::size_t j = 0; j < order; ++j) row(0, j * n + e) = per_entry[e][j];
  }
  return row;
}

template <class F>
TimeSeries map_values(const TimeSeries& x, F f) {
  TimeSeries y = x;
  for (double& v : y.values()) v = f(v);
  return y;
}

std::string describe(const std::string& name, Op op) {
  return name.empty() ? std::string(op_name(op)) : "'" + name + "'";
}

}  // namespace

const Graph::Node& Graph::node(NodeId id) const {
  if (id >= nodes_.size()) throw std::out_of_range("graph node id " + std::to_string(id));
  return nodes_[id];
}

Graph::Node& Graph::node(NodeId id) {
  if (id >= nodes_.size()) throw std::out_of_range("graph node id " + std::to_string(id));
  return nodes_[id];
}

NodeId Graph::push(Node n) {
  for (NodeId in : n.inputs) {
    if (in >= nodes_.size()) throw std::out_of_range("graph node consumes unknown node");
    n.requires_grad = n.requires_grad || nodes_[in].requires_grad;
  }
  const NodeId id = nodes_.size();
  if (!n.name.empty()) {
    if (!names_.emplace(n.name, id).second) {
      throw std::invalid_argument("duplicate graph node name '" + n.name + "'");
    }
  }
  nodes_.push_back(std::move(n));
  return id;
}

NodeId Graph::input(std::string name, std::size_t channels) {
  if (channels == 0) throw ShapeError("input '" + name + "' needs at least one channel");
  Node n{.op = Op::Input, .name = std::move(name)};
  n.channels = channels;
  n.sequence = true;
  n.requires_grad = true;
  return push(std::move(n));
}

NodeId Graph::parameter(std::string name, std::vector<double> init, ParamRole role, bool trainable) {
  if (init.empty()) throw ShapeError("parameter '" + name + "' is empty");
  Node n{.op = Op::Parameter, .name = std::move(name)};
  n.channels = init.size();
  n.trainable = trainable;
  n.requires_grad = trainable;
  n.role = role;
  n.value = TimeSeries::row(std::move(init));
  n.value_valid = true;
  return push(std::move(n));
}

NodeId Graph::gblock(NodeId u, NodeId b, std::optional<NodeId> a, LtiShape shape, std::string name) {
  const auto where = describe(name, Op::GBlock);
  if (!node(u).sequence || node(u).channels != shape.inputs) {
    throw ShapeError("gblock " + where + ": input must be a sequence with " +
                     std::to_string(shape.inputs) + " channels, got " + std::to_string(node(u).channels));
  }
  if (node(b).sequence || node(b).channels != shape.b_size()) {
    throw ShapeError("gblock " + where + ": numerator needs " + std::to_string(shape.b_size()) +
                     " coefficients, got " + std::to_string(node(b).channels));
  }
  Node n{.op = Op::GBlock, .name = std::move(name), .inputs = {u, b}};
  if (shape.na > 0) {
    if (!a || node(*a).sequence || node(*a).channels != shape.a_size()) {
      throw ShapeError("gblock " + where + ": denominator needs " + std::to_string(shape.a_size()) +
                       " coefficients");
    }
    n.inputs.push_back(*a);
  }
  n.channels = shape.outputs;
  n.sequence = true;
  n.lti = shape;
  return push(std::move(n));
}

NodeId Graph::integrator(NodeId u, std::string name) {
  const std::size_t c = node(u).channels;
  LtiShape shape{c, c, 0, 1};
  std::vector<double> b(shape.b_size(), 0.0);
  for (std::size_t k = 0; k < c; ++k) b[k * c + k] = 1.0;
  const std::string prefix = name.empty() ? "integrator" + std::to_string(nodes_.size()) : name;
  const NodeId bn = parameter(prefix + ".b", std::move(b), ParamRole::Constant, false);
  const NodeId an = parameter(prefix + ".a", std::vector<double>(shape.a_size(), -1.0), ParamRole::Constant, false);
  return gblock(u, bn, an, shape, std::move(name));
}

NodeId Graph::fir(NodeId u, NodeId b, LtiShape shape, std::string name) {
  shape.na = 0;
  const auto where = describe(name, Op::Fir);
  if (!node(u).sequence || node(u).channels != shape.inputs) {
    throw ShapeError("fir " + where + ": input channel count mismatch");
  }
  if (node(b).sequence || node(b).channels != shape.b_size()) {
    throw ShapeError("fir " + where + ": numerator needs " + std::to_string(shape.b_size()) + " coefficients");
  }
  Node n{.op = Op::Fir, .name = std::move(name), .inputs = {u, b}};
  n.channels = shape.outputs;
  n.sequence = true;
  n.lti = shape;
  return push(std::move(n));
}

NodeId Graph::affine(NodeId x, NodeId weight, NodeId bias, std::string name) {
  const auto where = describe(name, Op::Affine);
  const std::size_t in = node(x).channels;
  const std::size_t out = node(bias).channels;
  if (node(weight).sequence || node(bias).sequence) {
    throw ShapeError("affine " + where + ": weight and bias must be parameters");
  }
  if (node(weight).channels != in * out) {
    throw ShapeError("affine " + where + ": weight has " + std::to_string(node(weight).channels) +
                     " entries, expected " + std::to_string(in) + "x" + std::to_string(out));
  }
  nodes_[weight].fan_in = in;
  nodes_[bias].fan_in = in;
  Node n{.op = Op::Affine, .name = std::move(name), .inputs = {x, weight, bias}};
  n.channels = out;
  n.sequence = node(x).sequence;
  return push(std::move(n));
}

NodeId Graph::tanh(NodeId x) {
  Node n{.op = Op::Tanh, .inputs = {x}};
  n.channels = node(x).channels;
  n.sequence = node(x).sequence;
  return push(std::move(n));
}

NodeId Graph::sigmoid(NodeId x) {
  Node n{.op = Op::Sigmoid, .inputs = {x}};
  n.channels = node(x).channels;
  n.sequence = node(x).sequence;
  return push(std::move(n));
}

NodeId Graph::cos(NodeId x) {
  Node n{.op = Op::Cos, .inputs = {x}};
  n.channels = node(x).channels;
  n.sequence = node(x).sequence;
  return push(std::move(n));
}

NodeId Graph::abs(NodeId x) {
  Node n{.op = Op::Abs, .inputs = {x}};
  n.channels = node(x).channels;
  n.sequence = node(x).sequence;
  return push(std::move(n));
}

NodeId Graph::scale(NodeId x, double gain, double offset) {
  Node n{.op = Op::Scale, .inputs = {x}};
  n.channels = node(x).channels;
  n.sequence = node(x).sequence;
  n.gain = gain;
  n.offset = offset;
  return push(std::move(n));
}

NodeId Graph::mul(NodeId x, NodeId y) {
  if (node(x).channels != node(y).channels || node(x).sequence != node(y).sequence) {
    throw ShapeError("mul: operand shapes differ");
  }
  Node n{.op = Op::Mul, .inputs = {x, y}};
  n.channels = node(x).channels;
  n.sequence = node(x).sequence;
  return push(std::move(n));
}

NodeId Graph::add(std::vector<NodeId> terms, std::string name) {
  if (terms.empty()) throw ShapeError("add: no operands");
  for (NodeId t : terms) {
    if (node(t).channels != node(terms[0]).channels || node(t).sequence != node(terms[0]).sequence) {
      throw ShapeError("add " + describe(name, Op::Add) + ": operand channel counts differ (" +
                       std::to_string(node(terms[0]).channels) + " vs " + std::to_string(node(t).channels) + ")");
    }
  }
  Node n{.op = Op::Add, .name = std::move(name), .inputs = std::move(terms)};
  n.channels = node(n.inputs[0]).channels;
  n.sequence = node(n.inputs[0]).sequence;
  return push(std::move(n));
}

NodeId Graph::concat(std::vector<NodeId> parts, std::string name) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  std::size_t channels = 0;
  for (NodeId p : parts) {
    if (node(p).sequence != node(parts[0]).sequence) {
      throw ShapeError("concat " + describe(name, Op::Concat) + ": cannot mix sequences and parameters");
    }
    channels += node(p).channels;
  }
  Node n{.op = Op::Concat, .name = std::move(name), .inputs = std::move(parts)};
  n.channels = channels;
  n.sequence = node(n.inputs[0]).sequence;
  return push(std::move(n));
}

NodeId Graph::split(NodeId x, std::size_t first, std::size_t count) {
  if (count == 0 || first + count > node(x).channels) throw ShapeError("split: channel range out of bounds");
  Node n{.op = Op::Split, .inputs = {x}};
  n.channels = count;
  n.sequence = node(x).sequence;
  n.first = first;
  return push(std::move(n));
}

NodeId Graph::mse_loss(NodeId prediction, NodeId target) {
  if (node(prediction).channels != node(target).channels ||
      node(prediction).sequence != node(target).sequence) {
    throw ShapeError("mse_loss: prediction and target shapes differ");
  }
  Node n{.op = Op::MseLoss, .inputs = {prediction, target}};
  n.channels = 1;
  n.sequence = false;
  return push(std::move(n));
}

std::vector<bool> Graph::ancestors(NodeId target) const {
  node(target);
  std::vector<bool> mark(nodes_.size(), false);
  mark[target] = true;
  for (NodeId id = target + 1; id-- > 0;) {
    if (!mark[id]) continue;
    for (NodeId in : nodes_[id].inputs) mark[in] = true;
  }
  return mark;
}

const TimeSeries& Graph::forward(const Feed& inputs, NodeId target) {
  const auto mark = ancestors(target);
  for (auto& n : nodes_) {
    if (n.op != Op::Parameter) n.value_valid = false;
    n.grad_valid = false;
  }
  for (NodeId id = 0; id <= target; ++id) {
    if (mark[id]) evaluate(nodes_[id], inputs);
  }
  return nodes_[target].value;
}

void Graph::evaluate(Node& n, const Feed& inputs) {
  auto in = [&](std::size_t i) -> const TimeSeries& { return nodes_[n.inputs[i]].value; };
  auto same_samples = [&](const TimeSeries& x, const TimeSeries& y) {
    if (x.samples() != y.samples()) {
      throw ShapeError(std::string(op_name(n.op)) + ": operands have " + std::to_string(x.samples()) +
                       " and " + std::to_string(y.samples()) + " samples");
    }
  };

  switch (n.op) {
    case Op::Parameter:
      return;
    case Op::Input: {
      const auto it = inputs.find(n.name);
      if (it == inputs.end()) throw std::invalid_argument("missing graph input '" + n.name + "'");
      if (it->second.channels() != n.channels) {
        throw ShapeError("input '" + n.name + "' expects " + std::to_string(n.channels) + " channels, got " +
                         std::to_string(it->second.channels()));
      }
      n.value = it->second;
      break;
    }
    case Op::GBlock: {
      const auto op = make_operator(n.lti, in(1), n.lti.na > 0 ? &in(2) : nullptr);
      n.value = lti::mimo_forward(in(0), op, &n.entry_outputs);
      break;
    }
    case Op::Fir: {
      const auto op = make_operator(n.lti, in(1), nullptr);
      const TimeSeries& u = in(0);
      n.value = TimeSeries(u.samples(), n.lti.outputs);
      for (std::size_t k = 0; k < n.lti.outputs; ++k) {
        for (std::size_t h = 0; h < n.lti.inputs; ++h) {
          n.value.add_to_channel(k, lti::fir_forward(u.channel(h), op.at(k, h).b));
        }
      }
      break;
    }
    case Op::Affine:
      n.value = layers::affine_forward(in(0), in(1).values(), in(2).values());
      break;
    case Op::Tanh:
      n.value = map_values(in(0), [](double v) { return std::tanh(v); });
      break;
    case Op::Sigmoid:
      n.value = map_values(in(0), sigmoid_value);
      break;
    case Op::Cos:
      n.value = map_values(in(0), [](double v) { return std::cos(v); });
      break;
    case Op::Abs:
      n.value = map_values(in(0), [](double v) { return std::fabs(v); });
      break;
    case Op::Scale: {
      const double g = n.gain;
      const double c = n.offset;
      n.value = map_values(in(0), [g, c](double v) { return g * v + c; });
      break;
    }
    case Op::Mul: {
      same_samples(in(0), in(1));
      n.value = in(0);
      auto y = in(1).values();
      auto out = n.value.values();
      for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
      break;
    }
    case Op::Add: {
      n.value = in(0);
      auto out = n.value.values();
      for (std::size_t i = 1; i < n.inputs.size(); ++i) {
        same_samples(in(0), in(i));
        auto x = in(i).values();
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += x[j];
      }
      break;
    }
    case Op::Concat: {
      const std::size_t T = in(0).samples();
      n.value = TimeSeries(T, n.channels);
      std::size_t offset = 0;
      for (std::size_t i = 0; i < n.inputs.size(); ++i) {
        const TimeSeries& x = in(i);
        same_samples(in(0), x);
        for (std::size_t t = 0; t < T; ++t) {
          for (std::size_t k = 0; k < x.channels(); ++k) n.value(t, offset + k) = x(t, k);
        }
        offset += x.channels();
      }
      break;
    }
    case Op::Split: {
      const TimeSeries& x = in(0);
      n.value = TimeSeries(x.samples(), n.channels);
      for (std::size_t t = 0; t < x.samples(); ++t) {
        for (std::size_t k = 0; k < n.channels; ++k) n.value(t, k) = x(t, n.first + k);
      }
      break;
    }
    case Op::MseLoss: {
      same_samples(in(0), in(1));
      const auto p = in(0).values();
      const auto y = in(1).values();
      double acc = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) acc += (p[i] - y[i]) * (p[i] - y[i]);
      n.value = TimeSeries(1, 1, acc / static_cast<double>(p.size()));
      break;
    }
  }
  n.value_valid = true;
}

void Graph::accumulate(NodeId target, const TimeSeries& g) {
  Node& n = nodes_[target];
  if (!n.requires_grad) return;
  if (!n.grad_valid) {
    n.grad = g;
    n.grad_valid = true;
    return;
  }
  auto out = n.grad.values();
  auto in = g.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += in[i];
}

void Graph::backward(NodeId loss) {
  Node& root = node(loss);
  if (!root.value_valid) throw std::logic_error("backward called before forward");
  if (root.value.size() != 1) throw ShapeError("backward requires a scalar loss node");
  for (auto& n : nodes_) n.grad_valid = false;
  if (!root.requires_grad) return;

  root.grad = TimeSeries(1, 1, 1.0);
  root.grad_valid = true;
  for (NodeId id = loss + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.grad_valid || n.inputs.empty()) continue;
    if (!n.value_valid) throw std::logic_error("backward through a node without a forward value");
    propagate(n);
  }
  for (auto& n : nodes_) {
    if (n.op == Op::Parameter && n.grad_valid && n.fault != 1.0) {
      for (double& v : n.grad.values()) v *= n.fault;
    }
  }
}

void Graph::propagate(Node& n) {
  auto in = [&](std::size_t i) -> const TimeSeries& { return nodes_[n.inputs[i]].value; };
  auto wants = [&](std::size_t i) { return nodes_[n.inputs[i]].requires_grad; };
  const TimeSeries& g = n.grad;

  switch (n.op) {
    case Op::Input:
    case Op::Parameter:
      return;
    case Op::GBlock: {
      const bool has_a = n.lti.na > 0;
      const auto op = make_operator(n.lti, in(1), has_a ? &in(2) : nullptr);
      lti::MimoBackwardOptions options{wants(1), has_a && wants(2), wants(0)};
      const auto grads = lti::mimo_backward(in(0), op, g, &n.entry_outputs, options);
      if (options.u) accumulate(n.inputs[0], grads.u_bar);
      if (options.b) accumulate(n.inputs[1], gather_coefficients(grads.b_bar, n.lti.nb + 1));
      if (options.a) accumulate(n.inputs[2], gather_coefficients(grads.a_bar, n.lti.na));
      return;
    }
    case Op::Fir: {
      const auto op = make_operator(n.lti, in(1), nullptr);
      const TimeSeries& u = in(0);
      TimeSeries u_bar(u.samples(), u.channels());
      std::vector<std::vector<double>> b_bar(n.lti.entries());
      for (std::size_t k = 0; k < n.lti.outputs; ++k) {
        const auto gk = g.channel(k);
        for (std::size_t h = 0; h < n.lti.inputs; ++h) {
          auto fg = lti::fir_backward(u.channel(h), op.at(k, h).b, gk);
          u_bar.add_to_channel(h, fg.u_bar);
          b_bar[k * n.lti.inputs + h] = std::move(fg.b_bar);
        }
      }
      accumulate(n.inputs[0], u_bar);
      accumulate(n.inputs[1], gather_coefficients(b_bar, n.lti.nb + 1));
      return;
    }
    case Op::Affine: {
      auto grads = layers::affine_backward(in(0), in(1).values(), g);
      accumulate(n.inputs[0], grads.x_bar);
      accumulate(n.inputs[1], TimeSeries::row(std::move(grads.weight_bar)));
      accumulate(n.inputs[2], TimeSeries::row(std::move(grads.bias_bar)));
      return;
    }
    case Op::Tanh:
    case Op::Sigmoid:
    case Op::Cos:
    case Op::Abs: {
      TimeSeries d = g;
      auto out = d.values();
      const auto x = in(0).values();
      const auto y = n.value.values();
      for (std::size_t i = 0; i < out.size(); ++i) {
        switch (n.op) {
          case Op::Tanh: out[i] *= 1.0 - y[i] * y[i]; break;
          case Op::Sigmoid: out[i] *= y[i] * (1.0 - y[i]); break;
          case Op::Cos: out[i] *= -std::sin(x[i]); break;
          default: out[i] *= x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0); break;
        }
      }
      accumulate(n.inputs[0], d);
      return;
    }
    case Op::Scale:
      accumulate(n.inputs[0], map_values(g, [gain = n.gain](double v) { return gain * v; }));
      return;
    case Op::Mul: {
      for (std::size_t side = 0; side < 2; ++side) {
        if (!wants(side)) continue;
        TimeSeries d = g;
        auto out = d.values();
        const auto other = in(1 - side).values();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] *= other[i];
        accumulate(n.inputs[side], d);
      }
      return;
    }
    case Op::Add:
      for (NodeId t : n.inputs) accumulate(t, g);
      return;
    case Op::Concat: {
      std::size_t offset = 0;
      for (NodeId part : n.inputs) {
        const std::size_t c = nodes_[part].channels;
        TimeSeries d(g.samples(), c);
        for (std::size_t t = 0; t < g.samples(); ++t) {
          for (std::size_t k = 0; k < c; ++k) d(t, k) = g(t, offset + k);
        }
        accumulate(part, d);
        offset += c;
      }
      return;
    }
    case Op::Split: {
      const TimeSeries& x = in(0);
      TimeSeries d(x.samples(), x.channels());
      for (std::size_t t = 0; t < x.samples(); ++t) {
        for (std::size_t k = 0; k < n.channels; ++k) d(t, n.first + k) = g(t, k);
      }
      accumulate(n.inputs[0], d);
      return;
    }
    case Op::MseLoss: {
      const auto p = in(0).values();
      const auto y = in(1).values();
      const double c = 2.0 * g(0, 0) / static_cast<double>(p.size());
      TimeSeries dp = in(0);
      auto out = dp.values();
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * (p[i] - y[i]);
      if (wants(1)) accumulate(n.inputs[1], map_values(dp, [](double v) { return -v; }));
      accumulate(n.inputs[0], dp);
      return;
    }
  }
}

const TimeSeries& Graph::value(NodeId id) const {
  const Node& n = node(id);
  if (!n.value_valid) throw std::logic_error("node " + describe(n.name, n.op) + " has no forward value");
  return n.value;
}

const TimeSeries& Graph::grad(NodeId id) const {
  const Node& n = node(id);
  if (!n.grad_valid) throw std::logic_error("node " + describe(n.name, n.op) + " has no gradient");
  return n.grad;
}

std::vector<NodeId> Graph::parameters() const {
  std::vector<NodeId> out;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].op == Op::Parameter) out.push_back(id);
  }
  return out;
}

std::vector<NodeId> Graph::trainable_parameters() const {
  std::vector<NodeId> out;
  for (NodeId id : parameters()) {
    if (nodes_[id].trainable) out.push_back(id);
  }
  return out;
}

std::optional<NodeId> Graph::find(const std::string& name) const {
  const auto it = names_.find(name);
  if (it == names_.end()) return std::nullopt;
  return it->second;
}

void Graph::set_parameter(NodeId id, std::span<const double> values) {
  Node& n = node(id);
  if (n.op != Op::Parameter) throw std::invalid_argument("set_parameter on a non-parameter node");
  if (values.size() != n.value.size()) {
    throw ShapeError("parameter '" + n.name + "' has " + std::to_string(n.value.size()) + " entries, got " +
                     std::to_string(values.size()));
  }
  std::copy(values.begin(), values.end(), n.value.values().begin());
  invalidate();
}

std::span<double> Graph::parameter_values(NodeId id) {
  Node& n = node(id);
  if (n.op != Op::Parameter) throw std::invalid_argument("parameter_values on a non-parameter node");
  return n.value.values();
}

void Graph::invalidate() {
  for (auto& n : nodes_) {
    if (n.op != Op::Parameter) n.value_valid = false;
    n.grad_valid = false;
  }
}

void Graph::set_gradient_fault(NodeId id, double factor) {
  Node& n = node(id);
  if (n.op != Op::Parameter) throw std::invalid_argument("gradient faults apply to parameters only");
  n.fault = factor;
}

GradCheckReport grad_check(Graph& graph, const Feed& inputs, NodeId loss, double rel_step) {
  graph.forward(inputs, loss);
  graph.backward(loss);

  std::vector<std::pair<NodeId, std::vector<double>>> analytic_grads;
  for (NodeId id : graph.trainable_parameters()) {
    if (graph.has_grad(id)) analytic_grads.emplace_back(id, graph.grad(id).data());
  }

  GradCheckReport report;
  for (const auto& [id, analytic] : analytic_grads) {
    std::vector<double> numeric(analytic.size());
    auto theta = graph.parameter_values(id);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double saved = theta[i];
      const double h = rel_step * std::max(1.0, std::fabs(saved));
      auto at = [&](double offset) {
        theta[i] = saved + offset;
        return graph.forward(inputs, loss)(0, 0);
      };
      const double f1 = at(h) - at(-h);
      const double f2 = at(2.0 * h) - at(-2.0 * h);
      theta[i] = saved;
      numeric[i] = (8.0 * f1 - f2) / (12.0 * h);
    }
    double scale = 0.0;
    for (double v : numeric) scale = std::max(scale, std::fabs(v));
    GradCheckEntry entry{graph.name(id), analytic.size(), 0.0};
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      const double denom =
          std::max({std::fabs(analytic[i]), std::fabs(numeric[i]), 1e-3 * scale, 1e-12});
      entry.max_rel_error = std::max(entry.max_rel_error, std::fabs(analytic[i] - numeric[i]) / denom);
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.groups.push_back(std::move(entry));
  }
  graph.invalidate();
  return report;
}

}  // namespace dynonet::ad
