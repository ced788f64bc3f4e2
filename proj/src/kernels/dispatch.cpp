// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cstdlib>
#include <string>

#include "cslkit/error.hpp"
#include "cslkit/kernels.hpp"

namespace csl::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Backend initial_backend() {
  if (const char* env = std::getenv("CSLKIT_BACKEND")) {
    if (auto b = parse_backend(env); b && backend_available(*b)) return *b;
  }
  return best_backend();
}

std::atomic<Backend>& active_slot() {
  static std::atomic<Backend> slot{initial_backend()};
  return slot;
}

}  // namespace

const char* to_string(Backend b) {
  switch (b) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
  }
  return "unknown";
}

std::optional<Backend> parse_backend(std::string_view name) {
  if (name == "scalar") return Backend::scalar;
  if (name == "avx2") return Backend::avx2;
  return std::nullopt;
}

bool backend_available(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2: {
      static const bool ok = avx2::compiled() && cpu_has_avx2();
      return ok;
    }
  }
  return false;
}

Backend best_backend() { return backend_available(Backend::avx2) ? Backend::avx2 : Backend::scalar; }

Backend active_backend() { return active_slot().load(std::memory_order_relaxed); }

void set_active_backend(Backend b) {
  if (!backend_available(b)) {
    throw Error(std::string("kernel backend not available on this machine: ") + to_string(b));
  }
  active_slot().store(b, std::memory_order_relaxed);
}

template <typename T>
const KernelTable<T>& table(Backend b) {
  static const KernelTable<T> scalar_table{&scalar::conv2d<T>, &scalar::depthwise<T>};
  static const KernelTable<T> avx2_table{&avx2::conv2d<T>, &avx2::depthwise<T>};
  if (b == Backend::avx2 && backend_available(Backend::avx2)) return avx2_table;
  return scalar_table;
}

template const KernelTable<float>& table<float>(Backend);
template const KernelTable<double>& table<double>(Backend);

}  // namespace csl::kernels
