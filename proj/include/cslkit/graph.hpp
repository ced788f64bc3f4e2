// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cslkit/ops.hpp"
#include "cslkit/tensor.hpp"

namespace csl {

using NodeId = std::size_t;
using ParamId = std::size_t;

enum class OpKind {
  input,
  conv2d,
  depthwise_conv2d,
  bias_add,
  channel_affine,
  mish,
  sigmoid,
  max_pool,
  avg_pool,
  adaptive_avg_pool,
  global_avg_pool,
  resize_nearest,
  concat,
  add,
  scale_channels,
};

const char* to_string(OpKind op);

struct NodeAttrs {
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t multiplier = 1;
  std::size_t window = 0;
  std::size_t out_h = 0;
  std::size_t out_w = 0;
  ops::Padding padding = ops::Padding::same;
};

// Shapes are recorded for a single batch item (n = 1).
struct Node {
  std::string name;
  OpKind op = OpKind::input;
  std::vector<NodeId> inputs;
  std::vector<ParamId> params;
  NodeAttrs attrs;
  Shape shape;
};

enum class ParamRole { weight, bias, scale, shift };

struct ParamSpec {
  std::string name;
  Shape shape;
  ParamRole role = ParamRole::weight;
  std::size_t fan_in = 1;
};

/// Immutable DAG of primitive layers. Node ids are a topological order.
class Network {
 public:
  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  const std::vector<ParamSpec>& params() const { return params_; }
  const std::vector<NodeId>& inputs() const { return inputs_; }
  const std::vector<NodeId>& outputs() const { return outputs_; }
  const std::vector<std::string>& output_names() const { return output_names_; }

  std::optional<NodeId> find(std::string_view name) const;
  std::optional<ParamId> find_param(std::string_view name) const;

  // Distinct parameter scalars; a shared parameter counts once.
  std::size_t parameter_count() const;

 private:
  friend class GraphBuilder;
  std::vector<Node> nodes_;
  std::vector<ParamSpec> params_;
  std::vector<NodeId> inputs_;
  std::vector<NodeId> outputs_;
  std::vector<std::string> output_names_;
};

/// Appends layers one at a time, inferring and checking shapes as it goes.
class GraphBuilder {
 public:
  NodeId input(std::string name, std::size_t channels, std::size_t height, std::size_t width);

  ParamId param(std::string name, Shape shape, ParamRole role, std::size_t fan_in);

  // Creates "<name>.weight" with shape (K, K, C, out_ch).
  NodeId conv2d(NodeId x, std::string name, std::size_t out_ch, std::size_t kernel, std::size_t stride = 1,
                ops::Padding padding = ops::Padding::same);
  // Reuses an existing filter bank; the node owns no parameters of its own.
  NodeId conv2d_shared(NodeId x, std::string name, ParamId weight, std::size_t stride = 1,
                       ops::Padding padding = ops::Padding::same);
  NodeId depthwise(NodeId x, std::string name, std::size_t kernel, std::size_t multiplier = 1,
                   std::size_t stride = 1, ops::Padding padding = ops::Padding::same);
  NodeId bias_add(NodeId x, std::string name);
  NodeId bias_add_shared(NodeId x, std::string name, ParamId bias);
  NodeId affine(NodeId x, std::string name);
  NodeId mish(NodeId x, std::string name);
  NodeId sigmoid(NodeId x, std::string name);
  NodeId pool(NodeId x, std::string name, ops::PoolKind kind, std::size_t window, std::size_t stride);
  NodeId adaptive_avg_pool(NodeId x, std::string name, std::size_t out_h, std::size_t out_w);
  NodeId global_avg_pool(NodeId x, std::string name);
  NodeId resize(NodeId x, std::string name, std::size_t out_h, std::size_t out_w);
  NodeId concat(std::vector<NodeId> xs, std::string name);
  NodeId add(std::vector<NodeId> xs, std::string name);
  NodeId scale_channels(NodeId x, NodeId scales, std::string name);

  void output(NodeId x, std::string name);

  const Shape& shape(NodeId id) const { return nodes_.at(id).shape; }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  const ParamSpec& param_spec(ParamId id) const { return params_.at(id); }

  Network build() &&;

 private:
  NodeId push(Node node);
  void check_id(NodeId id) const;

  std::vector<Node> nodes_;
  std::vector<ParamSpec> params_;
  std::vector<NodeId> inputs_;
  std::vector<NodeId> outputs_;
  std::vector<std::string> output_names_;
  std::unordered_map<std::string, NodeId> node_names_;
  std::unordered_map<std::string, ParamId> param_names_;
};

/// Parameter values, stored at f64 and cast to the evaluation dtype on use.
class Weights {
 public:
  Weights() = default;
  explicit Weights(std::vector<Tensor<double>> tensors) : tensors_(std::move(tensors)) {}

  // Filter banks uniform in +-sqrt(1/fan_in); biases and shifts 0; scales 1.
  static Weights initialize(const Network& net, std::uint64_t seed);

  std::size_t size() const { return tensors_.size(); }
  Tensor<double>& operator[](ParamId id) { return tensors_.at(id); }
  const Tensor<double>& operator[](ParamId id) const { return tensors_.at(id); }
  std::vector<Tensor<double>>& tensors() { return tensors_; }
  const std::vector<Tensor<double>>& tensors() const { return tensors_; }

  void check_compatible(const Network& net) const;

 private:
  std::vector<Tensor<double>> tensors_;
};

}  // namespace csl
