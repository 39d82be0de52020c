#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vlcap/tensor.hpp"

namespace vlcap {

class Rng;

// Differentiable operations. Every op records an adjoint on the active tape
// when grad mode is on and an input requires grad.
//
// Binary elementwise ops broadcast scalars, and otherwise only over leading
// extents: the smaller operand's shape, with leading 1s stripped, must equal
// a suffix of the larger operand's shape ([n] or [1 x n] against [m x n]).

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // Hadamard
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
Tensor neg(const Tensor& x);

// Row-wise scaling: out[i, :] = x[i, :] * s[i]; s has m entries.
Tensor scale_rows(const Tensor& x, const Tensor& s);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor clamp_max(const Tensor& x, double limit);

// Max-subtracted; -inf entries get probability 0. A slice that is entirely
// -inf yields zeros.
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor log_softmax(const Tensor& x, std::size_t axis);

Tensor sum(const Tensor& x);  // -> [1]
Tensor mean(const Tensor& x);  // -> [1]
Tensor sum(const Tensor& x, std::size_t axis);  // axis removed
Tensor mean(const Tensor& x, std::size_t axis);  // axis removed

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> rows);

// Normalizes the last axis, then applies gamma/beta (each [n]).
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Unit L2 norm along the last axis. Throws DegenerateInputError on a zero row.
Tensor l2_normalize(const Tensor& x);

// Inverted dropout; identity when !training or rate == 0.
Tensor dropout(const Tensor& x, double rate, bool training, Rng* rng);

}  // namespace vlcap
