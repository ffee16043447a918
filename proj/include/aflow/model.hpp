// Fully connected velocity model in flat-parameter form. Parameters are laid
// out layer by layer as [W row-major (out x in), b], which keeps the whole
// model addressable by the flat kernels (adam, ema, axpy) and makes
// checkpointing trivial.
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aflow/arch.hpp"
#include "aflow/errors.hpp"
#include "aflow/fault.hpp"
#include "aflow/kernels.hpp"
#include "aflow/rng.hpp"

namespace aflow {

using GradVector = std::vector<double>;

// Scratch buffers reused across forward/backward calls; forward caches the
// per-layer pre-activations and activations that backward consumes.
struct Workspace {
  std::vector<std::vector<double>> acts;  // acts[0] = input, acts[i+1] = layer i output
  std::vector<std::vector<double>> pre;   // pre-activation of each layer
  std::vector<double> delta;
  std::vector<double> delta_prev;

  void prepare(const std::vector<std::pair<std::size_t, std::size_t>>& sizes) {
    const std::size_t n_layers = sizes.size();
    acts.resize(n_layers + 1);
    pre.resize(n_layers);
    acts[0].resize(sizes.front().first);
    std::size_t max_width = sizes.front().first;
    for (std::size_t i = 0; i < n_layers; ++i) {
      pre[i].resize(sizes[i].second);
      acts[i + 1].resize(sizes[i].second);
      if (sizes[i].second > max_width) max_width = sizes[i].second;
      if (sizes[i].first > max_width) max_width = sizes[i].first;
    }
    delta.resize(max_width);
    delta_prev.resize(max_width);
  }
};

class VelocityModel {
 public:
  VelocityModel() = default;

  explicit VelocityModel(ArchSpec arch) : arch_(std::move(arch)) {
    arch_.validate();
    sizes_ = arch_.layer_sizes();
    offsets_.reserve(sizes_.size());
    std::size_t off = 0;
    for (auto [in, out] : sizes_) {
      offsets_.push_back(off);
      off += in * out + out;
    }
    params_.assign(off, 0.0);
  }

  static VelocityModel zeros(const ArchSpec& arch) { return VelocityModel(arch); }

  // Xavier-uniform weights (limit sqrt(6/(fan_in+fan_out))), zero biases.
  static VelocityModel xavier(const ArchSpec& arch, Rng& rng) {
    VelocityModel m(arch);
    for (std::size_t i = 0; i < m.sizes_.size(); ++i) {
      const auto [in, out] = m.sizes_[i];
      const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
      double* w = m.params_.data() + m.offsets_[i];
      for (std::size_t j = 0; j < in * out; ++j) w[j] = rng.uniform(-limit, limit);
    }
    return m;
  }

  const ArchSpec& arch() const { return arch_; }
  std::size_t param_count() const { return params_.size(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  // v_theta(x_t, t, c). The returned span aliases workspace memory and stays
  // valid until the next forward on the same workspace.
  std::span<const double> forward(std::span<const double> x_t, double t,
                                  std::span<const double> cond,
                                  Workspace& ws) const {
    check_inputs(x_t, t, cond);
    ws.prepare(sizes_);
    double* input = ws.acts[0].data();
    for (std::size_t i = 0; i < arch_.data_dim; ++i) input[i] = x_t[i];
    input[arch_.data_dim] = t;
    for (std::size_t i = 0; i < arch_.cond_dim; ++i)
      input[arch_.data_dim + 1 + i] = cond[i];

    for (std::size_t l = 0; l < sizes_.size(); ++l) {
      const auto [in, out] = sizes_[l];
      const double* w = params_.data() + offsets_[l];
      const double* b = w + in * out;
      kernels::affine(w, b, ws.acts[l].data(), ws.pre[l].data(), out, in);
      if (l + 1 < sizes_.size()) {
        for (std::size_t j = 0; j < out; ++j)
          ws.acts[l + 1][j] = activate(ws.pre[l][j]);
      } else {
        ws.acts[l + 1] = ws.pre[l];  // linear output layer
      }
    }
    return std::span<const double>(ws.acts.back());
  }

  // Convenience forward that owns its scratch space.
  std::vector<double> velocity(std::span<const double> x_t, double t,
                               std::span<const double> cond) const {
    Workspace ws;
    auto v = forward(x_t, t, cond, ws);
    return std::vector<double>(v.begin(), v.end());
  }

  // Accumulates dL/dparams into grad given dL/dv for the forward pass cached
  // in ws. grad must have param_count() entries when accumulate is true; it
  // is zeroed and resized otherwise.
  void backward(const Workspace& ws, std::span<const double> upstream_v,
                GradVector& grad, bool accumulate = true) const {
    if (upstream_v.size() != arch_.data_dim)
      throw InputError("backward: upstream gradient has size " +
                       std::to_string(upstream_v.size()) + ", expected " +
                       std::to_string(arch_.data_dim));
    if (ws.acts.size() != sizes_.size() + 1 ||
        ws.acts[0].size() != arch_.input_dim())
      throw InputError("backward: workspace does not match a forward pass of this model");
    if (!accumulate) grad.assign(params_.size(), 0.0);
    if (grad.size() != params_.size())
      throw InputError("backward: gradient vector has wrong length");

    auto& delta = scratch_delta_;
    auto& delta_prev = scratch_delta_prev_;
    delta.assign(upstream_v.begin(), upstream_v.end());
    if (fault::flip_grad_sign())
      for (double& d : delta) d = -d;

    for (std::size_t li = sizes_.size(); li-- > 0;) {
      const auto [in, out] = sizes_[li];
      const double* w = params_.data() + offsets_[li];
      double* gw = grad.data() + offsets_[li];
      double* gb = gw + in * out;
      kernels::rank1_acc(gw, delta.data(), ws.acts[li].data(), out, in);
      kernels::axpy(1.0, delta.data(), gb, out);
      if (li == 0) break;
      delta_prev.assign(in, 0.0);
      kernels::matvec_t_acc(w, delta.data(), delta_prev.data(), out, in);
      // Chain through the activation of layer li-1.
      for (std::size_t j = 0; j < in; ++j)
        delta_prev[j] *= activate_grad(ws.pre[li - 1][j], ws.acts[li][j]);
      delta.swap(delta_prev);
    }
  }

 private:
  void check_inputs(std::span<const double> x_t, double t,
                    std::span<const double> cond) const {
    if (x_t.size() != arch_.data_dim)
      throw InputError("forward: x has size " + std::to_string(x_t.size()) +
                       ", expected " + std::to_string(arch_.data_dim));
    if (cond.size() != arch_.cond_dim)
      throw InputError("forward: condition has size " +
                       std::to_string(cond.size()) + ", expected " +
                       std::to_string(arch_.cond_dim));
    if (!std::isfinite(t)) throw InputError("forward: t is not finite");
  }

  double activate(double z) const {
    if (arch_.activation == Activation::tanh) return std::tanh(z);
    return z / (1.0 + std::exp(-z));  // silu
  }

  // a = activate(z) is passed in so tanh can reuse the cached value.
  double activate_grad(double z, double a) const {
    if (arch_.activation == Activation::tanh) return 1.0 - a * a;
    const double s = 1.0 / (1.0 + std::exp(-z));
    return s * (1.0 + z * (1.0 - s));
  }

  ArchSpec arch_;
  std::vector<std::pair<std::size_t, std::size_t>> sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
  mutable std::vector<double> scratch_delta_;
  mutable std::vector<double> scratch_delta_prev_;
};

}  // namespace aflow
