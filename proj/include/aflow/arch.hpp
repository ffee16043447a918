// Network architecture description for the velocity model: a fully connected
// stack mapping [x, t, c] -> velocity(x), with tanh or silu hidden units and a
// linear output layer.
#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "aflow/errors.hpp"

namespace aflow {

enum class Activation { tanh, silu };

inline const char* activation_name(Activation a) {
  return a == Activation::tanh ? "tanh" : "silu";
}

inline Activation activation_from_name(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "silu") return Activation::silu;
  throw ConfigError("unknown activation '" + s + "' (expected tanh or silu)");
}

struct ArchSpec {
  std::size_t data_dim = 0;
  std::size_t cond_dim = 0;  // zero for unconditional models
  std::vector<std::size_t> hidden;
  Activation activation = Activation::tanh;

  // Input is the concatenation [x (data_dim), t (1), c (cond_dim)].
  std::size_t input_dim() const { return data_dim + 1 + cond_dim; }

  void validate() const {
    if (data_dim == 0) throw ConfigError("arch: data_dim must be positive");
    for (std::size_t w : hidden)
      if (w == 0) throw ConfigError("arch: hidden widths must be positive");
  }

  // (in, out) for every affine layer, hidden layers first, linear output last.
  std::vector<std::pair<std::size_t, std::size_t>> layer_sizes() const {
    validate();
    std::vector<std::pair<std::size_t, std::size_t>> sizes;
    std::size_t in = input_dim();
    for (std::size_t w : hidden) {
      sizes.emplace_back(in, w);
      in = w;
    }
    sizes.emplace_back(in, data_dim);
    return sizes;
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (auto [in, out] : layer_sizes()) n += in * out + out;
    return n;
  }

  bool operator==(const ArchSpec&) const = default;
};

}  // namespace aflow
