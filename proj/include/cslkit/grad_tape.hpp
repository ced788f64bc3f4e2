// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cslkit/error.hpp"
#include "cslkit/tensor.hpp"

namespace csl {

using VarId = std::size_t;

/// Records primitive applications in evaluation order (which is a topological
/// order) and replays them once, in reverse, to accumulate gradients.
template <typename T>
class GradTape {
 public:
  // Maps d(loss)/d(output) to d(loss)/d(input_k), one tensor per recorded input.
  using BackwardFn = std::function<std::vector<Tensor<T>>(const Tensor<T>& grad_out)>;

  VarId leaf(Tensor<T> value) {
    entries_.push_back(Entry{std::move(value), {}, {}});
    return entries_.size() - 1;
  }

  VarId record(Tensor<T> value, std::vector<VarId> inputs, BackwardFn fn) {
    for (VarId v : inputs) {
      if (v >= entries_.size()) throw Error("grad tape: input var " + std::to_string(v) + " not on tape");
    }
    entries_.push_back(Entry{std::move(value), std::move(inputs), std::move(fn)});
    return entries_.size() - 1;
  }

  const Tensor<T>& value(VarId v) const { return entries_.at(v).value; }
  std::size_t size() const { return entries_.size(); }
  bool consumed() const { return consumed_; }
  const std::vector<VarId>& visit_order() const { return visited_; }

  /// One reverse sweep. `seeds` pair output vars with d(loss)/d(var). Returns
  /// the gradient of every var; vars the loss does not reach get zeros.
  std::vector<Tensor<T>> backward(std::span<const std::pair<VarId, Tensor<T>>> seeds) {
    if (consumed_) throw Error("grad tape already consumed by a previous backward pass");
    consumed_ = true;

    std::vector<std::optional<Tensor<T>>> grads(entries_.size());
    for (const auto& [v, g] : seeds) {
      if (v >= entries_.size()) throw Error("grad tape: seed var " + std::to_string(v) + " not on tape");
      if (g.shape() != entries_[v].value.shape()) {
        throw ShapeError("grad tape: seed " + g.shape().str() + " does not match var " + entries_[v].value.shape().str());
      }
      accumulate(grads[v], g);
    }

    for (std::size_t i = entries_.size(); i-- > 0;) {
      Entry& e = entries_[i];
      if (!e.backward || !grads[i]) continue;
      visited_.push_back(i);
      std::vector<Tensor<T>> in_grads = e.backward(*grads[i]);
      if (in_grads.size() != e.inputs.size()) throw Error("grad tape: backward arity mismatch at var " + std::to_string(i));
      for (std::size_t k = 0; k < e.inputs.size(); ++k) accumulate(grads[e.inputs[k]], in_grads[k]);
      e.backward = nullptr;  // drop captured activations early
    }

    std::vector<Tensor<T>> out;
    out.reserve(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      out.push_back(grads[i] ? std::move(*grads[i]) : Tensor<T>(entries_[i].value.shape()));
    }
    return out;
  }

  std::vector<Tensor<T>> backward(VarId output, const Tensor<T>& seed) {
    const std::pair<VarId, Tensor<T>> s{output, seed};
    return backward(std::span<const std::pair<VarId, Tensor<T>>>(&s, 1));
  }

 private:
  struct Entry {
    Tensor<T> value;
    std::vector<VarId> inputs;
    BackwardFn backward;
  };

  static void accumulate(std::optional<Tensor<T>>& slot, const Tensor<T>& g) {
    if (!slot) {
      slot = g;
      return;
    }
    if (slot->shape() != g.shape()) throw ShapeError("grad tape: gradient shape mismatch " + g.shape().str());
    auto dst = slot->data();
    auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }

  std::vector<Entry> entries_;
  std::vector<VarId> visited_;
  bool consumed_ = false;
};

}  // namespace csl
