// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "cslkit/executor.hpp"

#include <optional>
#include <string>

#include "cslkit/error.hpp"
#include "cslkit/ops.hpp"

namespace csl {

namespace {

template <typename T>
using Refs = std::vector<const Tensor<T>*>;

template <typename T>
Tensor<T> evaluate(const Node& n, const Refs<T>& in, const Refs<T>& p, MacCounter* counter) {
  const NodeAttrs& a = n.attrs;
  switch (n.op) {
    case OpKind::input:
      throw Error("evaluate: input node '" + n.name + "' has no operation");
    case OpKind::conv2d:
      return ops::conv2d(*in[0], *p[0], a.stride, a.padding, counter, n.name);
    case OpKind::depthwise_conv2d:
      return ops::depthwise_conv2d(*in[0], *p[0], a.stride, a.padding, counter, n.name);
    case OpKind::bias_add:
      return ops::bias_add(*in[0], *p[0]);
    case OpKind::channel_affine:
      return ops::channel_affine(*in[0], *p[0], *p[1]);
    case OpKind::mish:
      return ops::mish(*in[0]);
    case OpKind::sigmoid:
      return ops::sigmoid(*in[0]);
    case OpKind::max_pool:
      return ops::pool2d(*in[0], ops::PoolKind::max, a.window, a.stride);
    case OpKind::avg_pool:
      return ops::pool2d(*in[0], ops::PoolKind::avg, a.window, a.stride);
    case OpKind::adaptive_avg_pool:
      return ops::adaptive_avg_pool(*in[0], a.out_h, a.out_w);
    case OpKind::global_avg_pool:
      return ops::global_avg_pool(*in[0]);
    case OpKind::resize_nearest:
      return ops::resize_nearest(*in[0], a.out_h, a.out_w);
    case OpKind::concat:
      return ops::concat_channels<T>(std::span<const Tensor<T>* const>(in));
    case OpKind::add:
      return ops::add<T>(std::span<const Tensor<T>* const>(in));
    case OpKind::scale_channels:
      return ops::scale_channels(*in[0], *in[1]);
  }
  throw Error("evaluate: unknown op");
}

// Gradients for [inputs..., params...] in that order.
template <typename T>
typename GradTape<T>::BackwardFn make_vjp(const Node& n, const Refs<T>& in, const Refs<T>& p, const Tensor<T>& out) {
  const NodeAttrs a = n.attrs;
  using Grads = std::vector<Tensor<T>>;
  switch (n.op) {
    case OpKind::input:
      break;
    case OpKind::conv2d:
      return [x = *in[0], w = *p[0], a](const Tensor<T>& dy) {
        auto g = ops::conv2d_backward(x, w, a.stride, a.padding, dy);
        return Grads{std::move(g.dx), std::move(g.dw)};
      };
    case OpKind::depthwise_conv2d:
      return [x = *in[0], w = *p[0], a](const Tensor<T>& dy) {
        auto g = ops::depthwise_conv2d_backward(x, w, a.stride, a.padding, dy);
        return Grads{std::move(g.dx), std::move(g.dw)};
      };
    case OpKind::bias_add:
      return [](const Tensor<T>& dy) { return Grads{dy, ops::bias_add_backward(dy)}; };
    case OpKind::channel_affine:
      return [x = *in[0], s = *p[0]](const Tensor<T>& dy) {
        auto g = ops::channel_affine_backward(x, s, dy);
        return Grads{std::move(g.dx), std::move(g.dscale), std::move(g.dshift)};
      };
    case OpKind::mish:
      return [x = *in[0]](const Tensor<T>& dy) { return Grads{ops::mish_backward(x, dy)}; };
    case OpKind::sigmoid:
      return [y = out](const Tensor<T>& dy) { return Grads{ops::sigmoid_backward(y, dy)}; };
    case OpKind::max_pool:
    case OpKind::avg_pool: {
      const auto kind = n.op == OpKind::max_pool ? ops::PoolKind::max : ops::PoolKind::avg;
      return [x = *in[0], kind, a](const Tensor<T>& dy) {
        return Grads{ops::pool2d_backward(x, kind, a.window, a.stride, dy)};
      };
    }
    case OpKind::adaptive_avg_pool:
    case OpKind::global_avg_pool:
      return [s = in[0]->shape()](const Tensor<T>& dy) { return Grads{ops::adaptive_avg_pool_backward(s, dy)}; };
    case OpKind::resize_nearest:
      return [s = in[0]->shape()](const Tensor<T>& dy) { return Grads{ops::resize_nearest_backward(s, dy)}; };
    case OpKind::concat: {
      std::vector<std::size_t> sizes;
      for (const auto* t : in) sizes.push_back(t->shape().c);
      return [sizes](const Tensor<T>& dy) { return ops::split_channels(dy, std::span<const std::size_t>(sizes)); };
    }
    case OpKind::add:
      return [k = in.size()](const Tensor<T>& dy) { return Grads(k, dy); };
    case OpKind::scale_channels:
      return [x = *in[0], s = *in[1]](const Tensor<T>& dy) {
        auto g = ops::scale_channels_backward(x, s, dy);
        return Grads{std::move(g.dx), std::move(g.ds)};
      };
  }
  throw Error("make_vjp: unknown op for '" + n.name + "'");
}

template <typename T>
std::vector<Tensor<T>> cast_params(const Network& net, const Weights& weights) {
  weights.check_compatible(net);
  std::vector<Tensor<T>> out;
  out.reserve(weights.size());
  for (const auto& t : weights.tensors()) out.push_back(t.template cast<T>());
  return out;
}

void check_input(const Node& n, const Shape& got) {
  if (got.c != n.shape.c || got.h != n.shape.h || got.w != n.shape.w) {
    throw ShapeError("input '" + n.name + "' expects " + n.shape.str() + " (any batch), got " + got.str());
  }
}

template <typename T>
void check_input_count(const Network& net, std::span<const Tensor<T>> inputs) {
  if (inputs.size() != net.inputs().size()) {
    throw ShapeError("network takes " + std::to_string(net.inputs().size()) + " inputs, got " +
                     std::to_string(inputs.size()));
  }
}

}  // namespace

template <typename T>
std::vector<Tensor<T>> forward(const Network& net, const Weights& weights, std::span<const Tensor<T>> inputs,
                               MacCounter* counter) {
  check_input_count(net, inputs);
  const std::vector<Tensor<T>> params = cast_params<T>(net, weights);
  const auto& nodes = net.nodes();

  // Release activations after their last consumer.
  std::vector<std::size_t> uses(nodes.size(), 0);
  for (const Node& n : nodes) {
    for (NodeId i : n.inputs) ++uses[i];
  }
  for (NodeId o : net.outputs()) ++uses[o];

  std::vector<std::optional<Tensor<T>>> values(nodes.size());
  for (std::size_t k = 0; k < net.inputs().size(); ++k) {
    check_input(nodes[net.inputs()[k]], inputs[k].shape());
    values[net.inputs()[k]] = inputs[k];
  }
  for (NodeId id = 0; id < nodes.size(); ++id) {
    const Node& n = nodes[id];
    if (n.op == OpKind::input) continue;
    Refs<T> in;
    for (NodeId i : n.inputs) in.push_back(&*values[i]);
    Refs<T> p;
    for (ParamId pid : n.params) p.push_back(&params[pid]);
    values[id] = evaluate<T>(n, in, p, counter);
    for (NodeId i : n.inputs) {
      if (--uses[i] == 0) values[i].reset();
    }
  }
  std::vector<Tensor<T>> out;
  for (NodeId o : net.outputs()) out.push_back(*values[o]);
  return out;
}

template <typename T>
TapedForward<T> forward_taped(const Network& net, const Weights& weights, std::span<const Tensor<T>> inputs,
                              MacCounter* counter) {
  check_input_count(net, inputs);
  TapedForward<T> run;
  for (auto& p : cast_params<T>(net, weights)) run.params.push_back(run.tape.leaf(std::move(p)));

  const auto& nodes = net.nodes();
  std::vector<VarId> var(nodes.size(), 0);
  for (std::size_t k = 0; k < net.inputs().size(); ++k) {
    check_input(nodes[net.inputs()[k]], inputs[k].shape());
    var[net.inputs()[k]] = run.tape.leaf(inputs[k]);
    run.inputs.push_back(var[net.inputs()[k]]);
  }
  for (NodeId id = 0; id < nodes.size(); ++id) {
    const Node& n = nodes[id];
    if (n.op == OpKind::input) continue;
    Refs<T> in;
    std::vector<VarId> deps;
    for (NodeId i : n.inputs) {
      in.push_back(&run.tape.value(var[i]));
      deps.push_back(var[i]);
    }
    Refs<T> p;
    for (ParamId pid : n.params) {
      p.push_back(&run.tape.value(run.params[pid]));
      deps.push_back(run.params[pid]);
    }
    Tensor<T> out = evaluate<T>(n, in, p, counter);
    auto vjp = make_vjp<T>(n, in, p, out);
    var[id] = run.tape.record(std::move(out), std::move(deps), std::move(vjp));
  }
  for (NodeId o : net.outputs()) run.outputs.push_back(var[o]);
  return run;
}

template <typename T>
Gradients<T> backward(TapedForward<T>& run, std::span<const Tensor<T>> output_grads) {
  if (output_grads.size() != run.outputs.size()) {
    throw ShapeError("backward: expected " + std::to_string(run.outputs.size()) + " output gradients, got " +
                     std::to_string(output_grads.size()));
  }
  std::vector<std::pair<VarId, Tensor<T>>> seeds;
  for (std::size_t k = 0; k < output_grads.size(); ++k) seeds.emplace_back(run.outputs[k], output_grads[k]);
  auto all = run.tape.backward(std::span<const std::pair<VarId, Tensor<T>>>(seeds));
  Gradients<T> g;
  for (VarId v : run.inputs) g.inputs.push_back(std::move(all[v]));
  for (VarId v : run.params) g.params.push_back(std::move(all[v]));
  return g;
}

template std::vector<Tensor<float>> forward(const Network&, const Weights&, std::span<const Tensor<float>>, MacCounter*);
template std::vector<Tensor<double>> forward(const Network&, const Weights&, std::span<const Tensor<double>>, MacCounter*);
template TapedForward<float> forward_taped(const Network&, const Weights&, std::span<const Tensor<float>>, MacCounter*);
template TapedForward<double> forward_taped(const Network&, const Weights&, std::span<const Tensor<double>>, MacCounter*);
template Gradients<float> backward(TapedForward<float>&, std::span<const Tensor<float>>);
template Gradients<double> backward(TapedForward<double>&, std::span<const Tensor<double>>);

}  // namespace csl
