// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "cslkit/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>

#include "cslkit/error.hpp"

namespace csl::io {

static_assert(std::endian::native == std::endian::little, "tensor files assume a little-endian host");

namespace {

template <typename U>
void put(std::ostream& out, U v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <typename U>
U get(std::istream& in, const char* what) {
  U v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(U));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(U))) {
    throw FormatError(std::string("tensor file truncated while reading ") + what);
  }
  return v;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return in;
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor<float>& t) {
  out.write("CSLT", 4);
  put<std::uint16_t>(out, kTensorVersion);
  put<std::uint8_t>(out, 4);
  for (std::size_t d : t.shape().dims()) {
    if (d > std::numeric_limits<std::uint32_t>::max()) throw FormatError("tensor dimension exceeds u32");
    put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  }
  out.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
  if (!out) throw FormatError("tensor write failed");
}

Tensor<float> read_tensor(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (in.gcount() != 4 || std::memcmp(magic.data(), "CSLT", 4) != 0) throw FormatError("bad tensor magic");
  const auto version = get<std::uint16_t>(in, "version");
  if (version != kTensorVersion) throw FormatError("unsupported tensor version " + std::to_string(version));
  const auto rank = get<std::uint8_t>(in, "rank");
  if (rank < 1 || rank > 4) throw FormatError("unsupported tensor rank " + std::to_string(rank));
  std::array<std::size_t, 4> dims{1, 1, 1, 1};
  for (std::size_t i = 4 - rank; i < 4; ++i) {
    dims[i] = get<std::uint32_t>(in, "dims");
    if (dims[i] == 0) throw FormatError("tensor has a zero dimension");
  }
  const Shape shape{dims[0], dims[1], dims[2], dims[3]};
  std::vector<float> data(shape.numel());
  const auto bytes = static_cast<std::streamsize>(data.size() * sizeof(float));
  in.read(reinterpret_cast<char*>(data.data()), bytes);
  if (in.gcount() != bytes) throw FormatError("tensor payload truncated");
  return Tensor<float>(shape, std::move(data));
}

void save_tensor(const std::string& path, const Tensor<float>& t) {
  auto out = open_out(path);
  write_tensor(out, t);
}

Tensor<float> load_tensor(const std::string& path) {
  auto in = open_in(path);
  return read_tensor(in);
}

void write_named(std::ostream& out, const NamedTensors& tensors) {
  for (const auto& [name, t] : tensors) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) throw FormatError("tensor name too long");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor(out, t);
  }
}

NamedTensors read_named(std::istream& in) {
  NamedTensors out;
  while (in.peek() != std::char_traits<char>::eof()) {
    const auto len = get<std::uint16_t>(in, "name length");
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (in.gcount() != len) throw FormatError("tensor name truncated");
    out.emplace_back(std::move(name), read_tensor(in));
  }
  return out;
}

void save_named(const std::string& path, const NamedTensors& tensors) {
  auto out = open_out(path);
  write_named(out, tensors);
}

NamedTensors load_named(const std::string& path) {
  auto in = open_in(path);
  return read_named(in);
}

void save_weights(const std::string& path, const Network& net, const Weights& w) {
  w.check_compatible(net);
  NamedTensors named;
  for (std::size_t i = 0; i < net.params().size(); ++i) named.emplace_back(net.params()[i].name, w[i].cast<float>());
  save_named(path, named);
}

Weights load_weights(const std::string& path, const Network& net) {
  std::map<std::string, Tensor<float>> by_name;
  for (auto& [name, t] : load_named(path)) {
    if (!by_name.emplace(name, std::move(t)).second) throw FormatError(path + ": duplicate tensor '" + name + "'");
  }
  std::vector<Tensor<double>> tensors;
  for (const auto& p : net.params()) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw FormatError(path + ": missing parameter '" + p.name + "'");
    if (!(it->second.shape() == p.shape)) {
      throw FormatError(path + ": parameter '" + p.name + "' has shape " + it->second.shape().str() + ", expected " +
                        p.shape.str());
    }
    tensors.push_back(it->second.cast<double>());
    by_name.erase(it);
  }
  if (!by_name.empty()) throw FormatError(path + ": unknown parameter '" + by_name.begin()->first + "'");
  return Weights(std::move(tensors));
}

}  // namespace csl::io
