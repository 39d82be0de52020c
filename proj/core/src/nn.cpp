#include "vlcap/nn.hpp"

#include <cmath>
#include <limits>

#include "vlcap/errors.hpp"

namespace vlcap {

Tensor ParameterStore::create(const std::string& name, Shape shape, std::vector<double> init) {
  if (find(name) != nullptr) throw ContractError("parameter registered twice: " + name);
  Tensor t(std::move(shape), std::move(init), true);
  params_.push_back({name, t});
  return t;
}

Tensor ParameterStore::normal(const std::string& name, Shape shape, double stddev, Rng& rng) {
  std::vector<double> init(shape_numel(shape));
  for (auto& v : init) v = rng.normal(0.0, stddev);
  return create(name, std::move(shape), std::move(init));
}

Tensor ParameterStore::constant(const std::string& name, Shape shape, double value) {
  const auto n = shape_numel(shape);
  return create(name, std::move(shape), std::vector<double>(n, value));
}

const NamedParameter* ParameterStore::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

std::size_t ParameterStore::total_size() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
               Rng& rng, bool bias)
    : in_(in), out_(out) {
  weight_ = store.normal(name + ".weight", {in, out}, 1.0 / std::sqrt(static_cast<double>(in)),
                         rng);
  if (bias) bias_ = store.constant(name + ".bias", {out}, 0.0);
}

Tensor Linear::operator()(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != in_) {
    throw DimensionError("linear: expected [n x " + std::to_string(in_) + "], got " +
                         shape_str(x.shape()));
  }
  auto y = matmul(x, weight_);
  return bias_.defined() ? add(y, bias_) : y;
}

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name, std::size_t width,
                     double eps)
    : eps_(eps) {
  gamma_ = store.constant(name + ".gamma", {width}, 1.0);
  beta_ = store.constant(name + ".beta", {width}, 0.0);
}

Tensor make_attention_mask(std::size_t queries, std::size_t keys,
                           const std::vector<bool>& visible) {
  if (visible.size() != queries * keys) {
    throw DimensionError("attention mask: " + std::to_string(visible.size()) +
                         " flags for a " + std::to_string(queries) + " x " +
                         std::to_string(keys) + " mask");
  }
  std::vector<double> values(visible.size());
  for (std::size_t i = 0; i < visible.size(); ++i)
    values[i] = visible[i] ? 0.0 : -std::numeric_limits<double>::infinity();
  return Tensor({queries, keys}, std::move(values));
}

MultiHeadAttention::MultiHeadAttention(ParameterStore& store, const std::string& name,
                                       std::size_t width, std::size_t heads, Rng& rng)
    : width_(width), heads_(heads) {
  if (heads == 0 || width % heads != 0) {
    throw ConfigError("attention: width " + std::to_string(width) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  q_ = Linear(store, name + ".q", width, width, rng);
  // A key bias only shifts every score of a query row by the same amount,
  // which softmax ignores; it would be a parameter with zero gradient.
  k_ = Linear(store, name + ".k", width, width, rng, false);
  v_ = Linear(store, name + ".v", width, width, rng);
  o_ = Linear(store, name + ".o", width, width, rng);
}

Tensor MultiHeadAttention::operator()(const Tensor& query, const Tensor& key_value,
                                      const Tensor& mask,
                                      std::vector<Tensor>* weights_out) const {
  const auto sq = query.dim(0);
  const auto sk = key_value.dim(0);
  if (mask.defined() && (mask.rank() != 2 || mask.dim(0) != sq || mask.dim(1) != sk)) {
    throw DimensionError("attention: mask " + shape_str(mask.shape()) + " for " +
                         std::to_string(sq) + " queries and " + std::to_string(sk) + " keys");
  }
  const auto q = q_(query);
  const auto k = k_(key_value);
  const auto v = v_(key_value);
  const auto dh = width_ / heads_;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> outs;
  outs.reserve(heads_);
  if (weights_out) weights_out->clear();
  for (std::size_t h = 0; h < heads_; ++h) {
    const auto qh = heads_ == 1 ? q : slice(q, 1, h * dh, (h + 1) * dh);
    const auto kh = heads_ == 1 ? k : slice(k, 1, h * dh, (h + 1) * dh);
    const auto vh = heads_ == 1 ? v : slice(v, 1, h * dh, (h + 1) * dh);
    auto scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
    if (mask.defined()) scores = add(scores, mask);
    auto weights = softmax(scores, 1);
    if (weights_out) weights_out->push_back(weights);
    outs.push_back(matmul(weights, vh));
  }
  return o_(heads_ == 1 ? outs.front() : concat(outs, 1));
}

FeedForward::FeedForward(ParameterStore& store, const std::string& name, std::size_t in,
                         std::size_t hidden, std::size_t out, Rng& rng)
    : first_(store, name + ".fc1", in, hidden, rng), second_(store, name + ".fc2", hidden, out, rng) {}

}  // namespace vlcap
