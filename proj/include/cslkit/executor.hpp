// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "cslkit/grad_tape.hpp"
#include "cslkit/graph.hpp"
#include "cslkit/mac_counter.hpp"

namespace csl {

// Evaluates `net` on one tensor per declared input. Returns one tensor per
// declared output. Convolution MACs are charged to `counter` under node names.
template <typename T>
std::vector<Tensor<T>> forward(const Network& net, const Weights& weights, std::span<const Tensor<T>> inputs,
                               MacCounter* counter = nullptr);

template <typename T>
std::vector<Tensor<T>> forward(const Network& net, const Weights& weights, const Tensor<T>& input,
                               MacCounter* counter = nullptr) {
  return forward<T>(net, weights, std::span<const Tensor<T>>(&input, 1), counter);
}

template <typename T>
struct TapedForward {
  GradTape<T> tape;
  std::vector<VarId> inputs;   // per network input
  std::vector<VarId> params;   // per ParamId
  std::vector<VarId> outputs;  // per network output

  std::vector<Tensor<T>> output_values() const {
    std::vector<Tensor<T>> out;
    for (VarId v : outputs) out.push_back(tape.value(v));
    return out;
  }
};

template <typename T>
struct Gradients {
  std::vector<Tensor<T>> inputs;
  std::vector<Tensor<T>> params;
};

// Forward pass that records every primitive on a GradTape.
template <typename T>
TapedForward<T> forward_taped(const Network& net, const Weights& weights, std::span<const Tensor<T>> inputs,
                              MacCounter* counter = nullptr);

// Reverse sweep seeded with d(loss)/d(output_k); consumes the tape.
template <typename T>
Gradients<T> backward(TapedForward<T>& run, std::span<const Tensor<T>> output_grads);

}  // namespace csl
