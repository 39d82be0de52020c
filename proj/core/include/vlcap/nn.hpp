#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "vlcap/ops.hpp"
#include "vlcap/rng.hpp"
#include "vlcap/tensor.hpp"

namespace vlcap {

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

// Ordered registry of trainable leaves. Registration order is the
// checkpoint order and the optimizer order.
class ParameterStore {
 public:
  Tensor create(const std::string& name, Shape shape, std::vector<double> init);
  Tensor normal(const std::string& name, Shape shape, double stddev, Rng& rng);
  Tensor constant(const std::string& name, Shape shape, double value);

  const std::vector<NamedParameter>& all() const { return params_; }
  const NamedParameter* find(const std::string& name) const;
  std::size_t total_size() const;
  void zero_grad();

 private:
  std::vector<NamedParameter> params_;
};

// y = x W + b, W: [in x out], b: [out].
class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
         Rng& rng, bool bias = true);

  Tensor operator()(const Tensor& x) const;

  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }
  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }

 private:
  Tensor weight_;
  Tensor bias_;
  std::size_t in_ = 0;
  std::size_t out_ = 0;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParameterStore& store, const std::string& name, std::size_t width,
            double eps = 1e-5);

  Tensor operator()(const Tensor& x) const { return layer_norm(x, gamma_, beta_, eps_); }

 private:
  Tensor gamma_;
  Tensor beta_;
  double eps_ = 1e-5;
};

// Additive attention mask [queries x keys]: 0 where visible, -inf where not.
Tensor make_attention_mask(std::size_t queries, std::size_t keys,
                           const std::vector<bool>& visible);

// Scaled dot-product attention with per-head column slices of the projected
// Q, K, V. Query and key/value inputs may differ (cross/memory attention).
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParameterStore& store, const std::string& name, std::size_t width,
                     std::size_t heads, Rng& rng);

  // mask: [Sq x Sk] additive, or undefined for full visibility.
  // weights_out, when given, receives one [Sq x Sk] weight matrix per head.
  Tensor operator()(const Tensor& query, const Tensor& key_value, const Tensor& mask,
                    std::vector<Tensor>* weights_out = nullptr) const;

  std::size_t heads() const { return heads_; }
  const Linear& q() const { return q_; }
  const Linear& k() const { return k_; }
  const Linear& v() const { return v_; }
  const Linear& o() const { return o_; }

 private:
  Linear q_, k_, v_, o_;
  std::size_t width_ = 0;
  std::size_t heads_ = 1;
};

// linear -> relu -> linear.
class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(ParameterStore& store, const std::string& name, std::size_t in,
              std::size_t hidden, std::size_t out, Rng& rng);

  Tensor operator()(const Tensor& x) const { return second_(relu(first_(x))); }

 private:
  Linear first_;
  Linear second_;
};

}  // namespace vlcap
