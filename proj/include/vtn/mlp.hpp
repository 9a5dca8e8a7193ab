#pragma once

// Fully connected network with tanh hidden layers and a linear output layer.
// All weights live in one flat vector so optimizers and gradient checks can
// treat the network as a plain parameter array.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace vtn::nn {

class Mlp {
 public:
  // Per-layer post-activation values from the most recent forward pass.
  struct Cache {
    std::vector<std::vector<double>> activations;
  };

  Mlp() = default;

  /// sizes = {input, hidden..., output}
  explicit Mlp(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw std::invalid_argument("network needs an input and an output layer");
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offsets_.push_back(offset);
      offset += sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
    }
    params_.assign(offset, 0.0);
  }

  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  const std::vector<std::size_t>& sizes() const { return sizes_; }
  std::size_t parameter_count() const { return params_.size(); }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  // Uniform in ±1/sqrt(fan_in) for weights and biases.
  template <typename Rng>
  void initialize(Rng& rng) {
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
      std::uniform_real_distribution<double> dist(-bound, bound);
      std::size_t count = sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
      for (std::size_t k = 0; k < count; ++k) params_[offsets_[l] + k] = dist(rng);
    }
  }

  std::vector<double> forward(std::span<const double> input, Cache* cache = nullptr) const {
    if (input.size() != input_size()) throw std::invalid_argument("network input has wrong dimension");
    std::vector<double> act(input.begin(), input.end());
    if (cache != nullptr) {
      cache->activations.clear();
      cache->activations.push_back(act);
    }
    const std::size_t layers = sizes_.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t in = sizes_[l];
      const std::size_t out = sizes_[l + 1];
      const double* w = params_.data() + offsets_[l];
      const double* b = w + out * in;
      std::vector<double> next(out);
      for (std::size_t o = 0; o < out; ++o) {
        double sum = b[o];
        const double* row = w + o * in;
        for (std::size_t i = 0; i < in; ++i) sum += row[i] * act[i];
        next[o] = l + 1 < layers ? std::tanh(sum) : sum;
      }
      act = std::move(next);
      if (cache != nullptr) cache->activations.push_back(act);
    }
    return act;
  }

  /// Adds d(loss)/d(params) into `grad` given d(loss)/d(output).
  void backward(const Cache& cache, std::span<const double> grad_output, std::span<double> grad) const {
    if (grad.size() != params_.size()) throw std::invalid_argument("gradient buffer has wrong size");
    const std::size_t layers = sizes_.size() - 1;
    std::vector<double> delta(grad_output.begin(), grad_output.end());
    for (std::size_t l = layers; l-- > 0;) {
      const std::size_t in = sizes_[l];
      const std::size_t out = sizes_[l + 1];
      const std::vector<double>& input = cache.activations[l];
      const double* w = params_.data() + offsets_[l];
      double* gw = grad.data() + offsets_[l];
      double* gb = gw + out * in;
      std::vector<double> prev(l > 0 ? in : 0, 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        gb[o] += d;
        double* grow = gw + o * in;
        const double* row = w + o * in;
        for (std::size_t i = 0; i < in; ++i) grow[i] += d * input[i];
        if (l > 0)
          for (std::size_t i = 0; i < in; ++i) prev[i] += d * row[i];
      }
      if (l > 0) {
        // tanh'(z) = 1 - tanh(z)^2, with tanh(z) cached as this layer's input.
        for (std::size_t i = 0; i < in; ++i) prev[i] *= 1.0 - input[i] * input[i];
        delta = std::move(prev);
      }
    }
  }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

/// Adam, or plain gradient descent when `use_adam` is false.
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(std::size_t size, double learning_rate, bool use_adam)
      : lr_(learning_rate), adam_(use_adam), m_(size, 0.0), v_(size, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) throw std::invalid_argument("optimizer size mismatch");
    if (!adam_) {
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr_ * grad[i];
      return;
    }
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kEps);
    }
  }

  std::vector<double>& first_moment() { return m_; }
  std::vector<double>& second_moment() { return v_; }
  std::uint64_t& step_count() { return t_; }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double lr_ = 1e-3;
  bool adam_ = true;
  std::vector<double> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace vtn::nn
