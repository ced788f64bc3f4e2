// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "cslkit/graph.hpp"

#include <cmath>

#include "cslkit/error.hpp"
#include "cslkit/rng.hpp"

namespace csl {

const char* to_string(OpKind op) {
  switch (op) {
    case OpKind::input: return "input";
    case OpKind::conv2d: return "conv2d";
    case OpKind::depthwise_conv2d: return "depthwise_conv2d";
    case OpKind::bias_add: return "bias_add";
    case OpKind::channel_affine: return "channel_affine";
    case OpKind::mish: return "mish";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::max_pool: return "max_pool";
    case OpKind::avg_pool: return "avg_pool";
    case OpKind::adaptive_avg_pool: return "adaptive_avg_pool";
    case OpKind::global_avg_pool: return "global_avg_pool";
    case OpKind::resize_nearest: return "resize_nearest";
    case OpKind::concat: return "concat";
    case OpKind::add: return "add";
    case OpKind::scale_channels: return "scale_channels";
  }
  return "unknown";
}

std::optional<NodeId> Network::find(std::string_view name) const {
  for (NodeId i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].name == name) return i;
  }
  return std::nullopt;
}

std::optional<ParamId> Network::find_param(std::string_view name) const {
  for (ParamId i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t Network::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.shape.numel();
  return total;
}

// ---- GraphBuilder ---------------------------------------------------------

void GraphBuilder::check_id(NodeId id) const {
  if (id >= nodes_.size()) throw SpecError("graph: unknown node id " + std::to_string(id));
}

NodeId GraphBuilder::push(Node node) {
  if (node.name.empty()) throw SpecError("graph: layer name must not be empty");
  if (node_names_.count(node.name)) throw SpecError("graph: duplicate layer name '" + node.name + "'");
  validate_shape(node.shape);
  const NodeId id = nodes_.size();
  node_names_.emplace(node.name, id);
  nodes_.push_back(std::move(node));
  return id;
}

NodeId GraphBuilder::input(std::string name, std::size_t channels, std::size_t height, std::size_t width) {
  Node n;
  n.name = std::move(name);
  n.op = OpKind::input;
  n.shape = Shape{1, channels, height, width};
  const NodeId id = push(std::move(n));
  inputs_.push_back(id);
  return id;
}

ParamId GraphBuilder::param(std::string name, Shape shape, ParamRole role, std::size_t fan_in) {
  validate_shape(shape);
  if (param_names_.count(name)) throw SpecError("graph: duplicate parameter name '" + name + "'");
  const ParamId id = params_.size();
  param_names_.emplace(name, id);
  params_.push_back(ParamSpec{std::move(name), shape, role, fan_in});
  return id;
}

NodeId GraphBuilder::conv2d(NodeId x, std::string name, std::size_t out_ch, std::size_t kernel, std::size_t stride,
                            ops::Padding padding) {
  check_id(x);
  const std::size_t c = shape(x).c;
  const ParamId w = param(name + ".weight", Shape{kernel, kernel, c, out_ch}, ParamRole::weight, kernel * kernel * c);
  NodeId id = conv2d_shared(x, std::move(name), w, stride, padding);
  return id;
}

NodeId GraphBuilder::conv2d_shared(NodeId x, std::string name, ParamId weight, std::size_t stride,
                                   ops::Padding padding) {
  check_id(x);
  const Shape& ws = params_.at(weight).shape;
  const Shape& xs = shape(x);
  if (ws.n != ws.c || ws.n % 2 == 0) throw ShapeError(name + ": kernel must be square and odd, got " + ws.str());
  if (ws.h != xs.c) throw ShapeError(name + ": filter bank " + ws.str() + " does not fit input " + xs.str());
  if (stride != 1 && stride != 2) throw ShapeError(name + ": stride must be 1 or 2");
  const auto ay = ops::conv_axis(xs.h, ws.n, stride, padding);
  const auto ax = ops::conv_axis(xs.w, ws.n, stride, padding);
  Node n;
  n.name = std::move(name);
  n.op = OpKind::conv2d;
  n.inputs = {x};
  n.params = {weight};
  n.attrs.kernel = ws.n;
  n.attrs.stride = stride;
  n.attrs.padding = padding;
  n.shape = Shape{1, ws.w, ay.out, ax.out};
  return push(std::move(n));
}

NodeId GraphBuilder::depthwise(NodeId x, std::string name, std::size_t kernel, std::size_t multiplier,
                               std::size_t stride, ops::Padding padding) {
  check_id(x);
  if (kernel % 2 == 0) throw ShapeError(name + ": kernel size must be odd");
  if (multiplier == 0) throw ShapeError(name + ": multiplier must be >= 1");
  if (stride != 1 && stride != 2) throw ShapeError(name + ": stride must be 1 or 2");
  const Shape xs = shape(x);
  const ParamId w = param(name + ".weight", Shape{kernel, kernel, xs.c, multiplier}, ParamRole::weight, kernel * kernel);
  const auto ay = ops::conv_axis(xs.h, kernel, stride, padding);
  const auto ax = ops::conv_axis(xs.w, kernel, stride, padding);
  Node n;
  n.name = std::move(name);
  n.op = OpKind::depthwise_conv2d;
  n.inputs = {x};
  n.params = {w};
  n.attrs.kernel = kernel;
  n.attrs.multiplier = multiplier;
  n.attrs.stride = stride;
  n.attrs.padding = padding;
  n.shape = Shape{1, xs.c * multiplier, ay.out, ax.out};
  return push(std::move(n));
}

NodeId GraphBuilder::bias_add(NodeId x, std::string name) {
  check_id(x);
  const ParamId b = param(name + ".bias", Shape{1, shape(x).c, 1, 1}, ParamRole::bias, 1);
  return bias_add_shared(x, std::move(name), b);
}

NodeId GraphBuilder::bias_add_shared(NodeId x, std::string name, ParamId bias) {
  check_id(x);
  if (params_.at(bias).shape != Shape{1, shape(x).c, 1, 1}) {
    throw ShapeError(name + ": bias " + params_.at(bias).shape.str() + " does not fit input " + shape(x).str());
  }
  Node n;
  n.name = std::move(name);
  n.op = OpKind::bias_add;
  n.inputs = {x};
  n.params = {bias};
  n.shape = shape(x);
  return push(std::move(n));
}

NodeId GraphBuilder::affine(NodeId x, std::string name) {
  check_id(x);
  const Shape ps{1, shape(x).c, 1, 1};
  const ParamId s = param(name + ".scale", ps, ParamRole::scale, 1);
  const ParamId b = param(name + ".shift", ps, ParamRole::shift, 1);
  Node n;
  n.name = std::move(name);
  n.op = OpKind::channel_affine;
  n.inputs = {x};
  n.params = {s, b};
  n.shape = shape(x);
  return push(std::move(n));
}

NodeId GraphBuilder::mish(NodeId x, std::string name) {
  check_id(x);
  Node n;
  n.name = std::move(name);
  n.op = OpKind::mish;
  n.inputs = {x};
  n.shape = shape(x);
  return push(std::move(n));
}

NodeId GraphBuilder::sigmoid(NodeId x, std::string name) {
  check_id(x);
  Node n;
  n.name = std::move(name);
  n.op = OpKind::sigmoid;
  n.inputs = {x};
  n.shape = shape(x);
  return push(std::move(n));
}

NodeId GraphBuilder::pool(NodeId x, std::string name, ops::PoolKind kind, std::size_t window, std::size_t stride) {
  check_id(x);
  const Shape xs = shape(x);
  if (window == 0 || stride == 0 || window > xs.h || window > xs.w) {
    throw ShapeError(name + ": pooling window " + std::to_string(window) + " does not fit input " + xs.str());
  }
  Node n;
  n.name = std::move(name);
  n.op = kind == ops::PoolKind::max ? OpKind::max_pool : OpKind::avg_pool;
  n.inputs = {x};
  n.attrs.window = window;
  n.attrs.stride = stride;
  n.shape = Shape{1, xs.c, (xs.h - window) / stride + 1, (xs.w - window) / stride + 1};
  return push(std::move(n));
}

NodeId GraphBuilder::adaptive_avg_pool(NodeId x, std::string name, std::size_t out_h, std::size_t out_w) {
  check_id(x);
  const Shape xs = shape(x);
  if (out_h == 0 || out_w == 0 || out_h > xs.h || out_w > xs.w) {
    throw ShapeError(name + ": adaptive pooling to (" + std::to_string(out_h) + "," + std::to_string(out_w) +
                     ") is invalid for input " + xs.str());
  }
  Node n;
  n.name = std::move(name);
  n.op = OpKind::adaptive_avg_pool;
  n.inputs = {x};
  n.attrs.out_h = out_h;
  n.attrs.out_w = out_w;
  n.shape = Shape{1, xs.c, out_h, out_w};
  return push(std::move(n));
}

NodeId GraphBuilder::global_avg_pool(NodeId x, std::string name) {
  check_id(x);
  Node n;
  n.name = std::move(name);
  n.op = OpKind::global_avg_pool;
  n.inputs = {x};
  n.shape = Shape{1, shape(x).c, 1, 1};
  return push(std::move(n));
}

NodeId GraphBuilder::resize(NodeId x, std::string name, std::size_t out_h, std::size_t out_w) {
  check_id(x);
  if (out_h == 0 || out_w == 0) throw ShapeError(name + ": resize target must be >= 1");
  Node n;
  n.name = std::move(name);
  n.op = OpKind::resize_nearest;
  n.inputs = {x};
  n.attrs.out_h = out_h;
  n.attrs.out_w = out_w;
  n.shape = Shape{1, shape(x).c, out_h, out_w};
  return push(std::move(n));
}

NodeId GraphBuilder::concat(std::vector<NodeId> xs, std::string name) {
  if (xs.empty()) throw ShapeError(name + ": concat needs inputs");
  std::size_t channels = 0;
  const Shape first = shape(xs.front());
  for (NodeId x : xs) {
    check_id(x);
    const Shape& s = shape(x);
    if (s.h != first.h || s.w != first.w) {
      throw ShapeError(name + ": concat input " + s.str() + " does not match " + first.str());
    }
    channels += s.c;
  }
  Node n;
  n.name = std::move(name);
  n.op = OpKind::concat;
  n.inputs = std::move(xs);
  n.shape = Shape{1, channels, first.h, first.w};
  return push(std::move(n));
}

NodeId GraphBuilder::add(std::vector<NodeId> xs, std::string name) {
  if (xs.empty()) throw ShapeError(name + ": add needs inputs");
  const Shape first = shape(xs.front());
  for (NodeId x : xs) {
    check_id(x);
    if (shape(x) != first) throw ShapeError(name + ": add input " + shape(x).str() + " does not match " + first.str());
  }
  Node n;
  n.name = std::move(name);
  n.op = OpKind::add;
  n.inputs = std::move(xs);
  n.shape = first;
  return push(std::move(n));
}

NodeId GraphBuilder::scale_channels(NodeId x, NodeId scales, std::string name) {
  check_id(x);
  check_id(scales);
  const Shape& ss = shape(scales);
  if (ss.c != shape(x).c || ss.h != 1 || ss.w != 1) {
    throw ShapeError(name + ": scales " + ss.str() + " do not match input " + shape(x).str());
  }
  Node n;
  n.name = std::move(name);
  n.op = OpKind::scale_channels;
  n.inputs = {x, scales};
  n.shape = shape(x);
  return push(std::move(n));
}

void GraphBuilder::output(NodeId x, std::string name) {
  check_id(x);
  outputs_.push_back(x);
  output_names_.push_back(std::move(name));
}

Network GraphBuilder::build() && {
  if (inputs_.empty()) throw SpecError("graph: network has no inputs");
  if (outputs_.empty()) throw SpecError("graph: network has no outputs");
  Network net;
  net.nodes_ = std::move(nodes_);
  net.params_ = std::move(params_);
  net.inputs_ = std::move(inputs_);
  net.outputs_ = std::move(outputs_);
  net.output_names_ = std::move(output_names_);
  return net;
}

// ---- Weights ----------------------------------------------------------------

Weights Weights::initialize(const Network& net, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor<double>> tensors;
  tensors.reserve(net.params().size());
  for (const ParamSpec& p : net.params()) {
    Tensor<double> t(p.shape);
    switch (p.role) {
      case ParamRole::weight: {
        const double bound = std::sqrt(1.0 / static_cast<double>(p.fan_in));
        for (double& v : t.data()) v = rng.uniform(-bound, bound);
        break;
      }
      case ParamRole::scale:
        for (double& v : t.data()) v = 1.0;
        break;
      case ParamRole::bias:
      case ParamRole::shift:
        break;
    }
    tensors.push_back(std::move(t));
  }
  return Weights(std::move(tensors));
}

void Weights::check_compatible(const Network& net) const {
  if (tensors_.size() != net.params().size()) {
    throw ShapeError("weights hold " + std::to_string(tensors_.size()) + " tensors but network declares " +
                     std::to_string(net.params().size()));
  }
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].shape() != net.params()[i].shape) {
      throw ShapeError("weight '" + net.params()[i].name + "' has shape " + tensors_[i].shape().str() +
                       ", expected " + net.params()[i].shape.str());
    }
  }
}

}  // namespace csl
