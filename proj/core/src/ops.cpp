#include "vlcap/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vlcap/errors.hpp"
#include "vlcap/rng.hpp"

namespace vlcap {

using detail::Node;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Node& input(Node& self, std::size_t i) { return *self.inputs[i]; }

// Resolves leading-extent broadcasting. Returns the output shape; sets the
// period with which each operand repeats (== its numel).
Shape broadcast_shape(const Tensor& a, const Tensor& b, const char* op) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa == sb) return sa;
  if (b.numel() == 1) return sa;
  if (a.numel() == 1) return sb;
  auto strip = [](const Shape& s) {
    std::size_t i = 0;
    while (i + 1 < s.size() && s[i] == 1) ++i;
    return Shape(s.begin() + static_cast<std::ptrdiff_t>(i), s.end());
  };
  auto is_suffix = [](const Shape& small, const Shape& big) {
    if (small.size() > big.size()) return false;
    return std::equal(small.rbegin(), small.rend(), big.rbegin());
  };
  if (a.numel() >= b.numel() && is_suffix(strip(sb), sa)) return sa;
  if (b.numel() > a.numel() && is_suffix(strip(sa), sb)) return sb;
  throw DimensionError(std::string(op) + ": shapes " + shape_str(sa) + " and " + shape_str(sb) +
                       " are not broadcast-compatible");
}

template <typename Fwd, typename GradA, typename GradB>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, GradA ga,
                 GradB gb) {
  auto out_shape = broadcast_shape(a, b, name);
  const auto n = shape_numel(out_shape);
  const auto na = a.numel();
  const auto nb = b.numel();
  auto da = a.data();
  auto db = b.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(da[i % na], db[i % nb]);
  return detail::make_result(std::move(out_shape), std::move(out), {a, b},
                             [n, na, nb, ga, gb](Node& self) {
                               auto& A = input(self, 0);
                               auto& B = input(self, 1);
                               const auto& g = self.grad;
                               if (A.requires_grad) {
                                 auto& gA = A.grad_buffer();
                                 for (std::size_t i = 0; i < n; ++i)
                                   gA[i % na] += g[i] * ga(A.value[i % na], B.value[i % nb]);
                               }
                               if (B.requires_grad) {
                                 auto& gB = B.grad_buffer();
                                 for (std::size_t i = 0; i < n; ++i)
                                   gB[i % nb] += g[i] * gb(A.value[i % na], B.value[i % nb]);
                               }
                             });
}

// dy/dx expressed through x and y = f(x).
template <typename Fwd, typename Deriv>
Tensor unary_op(const Tensor& x, Fwd fwd, Deriv deriv) {
  auto dx = x.data();
  std::vector<double> out(dx.size());
  for (std::size_t i = 0; i < dx.size(); ++i) out[i] = fwd(dx[i]);
  return detail::make_result(x.shape(), std::move(out), {x}, [deriv](Node& self) {
    auto& X = input(self, 0);
    auto& gX = X.grad_buffer();
    for (std::size_t i = 0; i < gX.size(); ++i)
      gX[i] += self.grad[i] * deriv(X.value[i], self.value[i]);
  });
}

struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for " + shape_str(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

void require_rank2(const Tensor& x, const char* op) {
  if (x.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a 2-D tensor, got " + shape_str(x.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor scale(const Tensor& x, double factor) {
  return unary_op(
      x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary_op(
      x, [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor scale_rows(const Tensor& x, const Tensor& s) {
  require_rank2(x, "scale_rows");
  const auto m = x.dim(0);
  const auto n = x.dim(1);
  if (s.numel() != m) {
    throw DimensionError("scale_rows: " + shape_str(x.shape()) + " with scales " +
                         shape_str(s.shape()));
  }
  auto dx = x.data();
  auto ds = s.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = dx[i * n + j] * ds[i];
  return detail::make_result({m, n}, std::move(out), {x, s}, [m, n](Node& self) {
    auto& X = input(self, 0);
    auto& S = input(self, 1);
    const auto& g = self.grad;
    if (X.requires_grad) {
      auto& gX = X.grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gX[i * n + j] += g[i * n + j] * S.value[i];
    }
    if (S.requires_grad) {
      auto& gS = S.grad_buffer();
      for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * X.value[i * n + j];
        gS[i] += acc;
      }
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_str(a.shape()) + " by " +
                         shape_str(b.shape()));
  }
  const auto m = a.dim(0);
  const auto k = a.dim(1);
  const auto n = b.dim(1);
  auto A = a.data();
  auto B = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      const double* brow = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
  return detail::make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    auto& An = input(self, 0);
    auto& Bn = input(self, 1);
    const auto& dC = self.grad;
    if (An.requires_grad) {
      // dA = dC * B^T
      auto& dA = An.grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          const double* brow = Bn.value.data() + p * n;
          const double* crow = dC.data() + i * n;
          for (std::size_t j = 0; j < n; ++j) acc += crow[j] * brow[j];
          dA[i * k + p] += acc;
        }
    }
    if (Bn.requires_grad) {
      // dB = A^T * dC
      auto& dB = Bn.grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = An.value[i * k + p];
          const double* crow = dC.data() + i * n;
          double* brow = dB.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) brow[j] += aip * crow[j];
        }
    }
  });
}

Tensor transpose(const Tensor& x) {
  require_rank2(x, "transpose");
  const auto m = x.dim(0);
  const auto n = x.dim(1);
  auto d = x.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = d[i * n + j];
  return detail::make_result({n, m}, std::move(out), {x}, [m, n](Node& self) {
    auto& gX = input(self, 0).grad_buffer();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) gX[i * n + j] += self.grad[j * m + i];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return detail::make_result(std::move(shape), std::move(out), {x}, [](Node& self) {
    auto& gX = input(self, 0).grad_buffer();
    for (std::size_t i = 0; i < gX.size(); ++i) gX[i] += self.grad[i];
  });
}

Tensor tanh(const Tensor& x) {
  return unary_op(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary_op(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
  return unary_op(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& x) {
  return unary_op(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary_op(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor clamp_max(const Tensor& x, double limit) {
  return unary_op(
      x, [limit](double v) { return std::min(v, limit); },
      [limit](double v, double) { return v < limit ? 1.0 : 0.0; });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const auto s = split_axis(x.shape(), axis, "softmax");
  auto d = x.data();
  std::vector<double> out(d.size(), 0.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t in = 0; in < s.inner; ++in) {
      auto idx = [&](std::size_t i) { return (o * s.extent + i) * s.inner + in; };
      double mx = kNegInf;
      for (std::size_t i = 0; i < s.extent; ++i) mx = std::max(mx, d[idx(i)]);
      if (mx == kNegInf) continue;
      double total = 0.0;
      for (std::size_t i = 0; i < s.extent; ++i) {
        const double e = std::exp(d[idx(i)] - mx);
        out[idx(i)] = e;
        total += e;
      }
      for (std::size_t i = 0; i < s.extent; ++i) out[idx(i)] /= total;
    }
  return detail::make_result(x.shape(), std::move(out), {x}, [s](Node& self) {
    auto& gX = input(self, 0).grad_buffer();
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t in = 0; in < s.inner; ++in) {
        auto idx = [&](std::size_t i) { return (o * s.extent + i) * s.inner + in; };
        double dot = 0.0;
        for (std::size_t i = 0; i < s.extent; ++i) dot += g[idx(i)] * y[idx(i)];
        for (std::size_t i = 0; i < s.extent; ++i) gX[idx(i)] += y[idx(i)] * (g[idx(i)] - dot);
      }
  });
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
  const auto s = split_axis(x.shape(), axis, "log_softmax");
  auto d = x.data();
  std::vector<double> out(d.size());
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t in = 0; in < s.inner; ++in) {
      auto idx = [&](std::size_t i) { return (o * s.extent + i) * s.inner + in; };
      double mx = kNegInf;
      for (std::size_t i = 0; i < s.extent; ++i) mx = std::max(mx, d[idx(i)]);
      double total = 0.0;
      for (std::size_t i = 0; i < s.extent; ++i) total += std::exp(d[idx(i)] - mx);
      const double lse = mx + std::log(total);
      for (std::size_t i = 0; i < s.extent; ++i) out[idx(i)] = d[idx(i)] - lse;
    }
  return detail::make_result(x.shape(), std::move(out), {x}, [s](Node& self) {
    auto& gX = input(self, 0).grad_buffer();
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t in = 0; in < s.inner; ++in) {
        auto idx = [&](std::size_t i) { return (o * s.extent + i) * s.inner + in; };
        double gsum = 0.0;
        for (std::size_t i = 0; i < s.extent; ++i) gsum += g[idx(i)];
        for (std::size_t i = 0; i < s.extent; ++i)
          gX[idx(i)] += g[idx(i)] - std::exp(y[idx(i)]) * gsum;
      }
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return detail::make_result({1}, {total}, {x}, [](Node& self) {
    auto& gX = input(self, 0).grad_buffer();
    for (auto& g : gX) g += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor sum(const Tensor& x, std::size_t axis) {
  const auto s = split_axis(x.shape(), axis, "sum");
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (out_shape.empty()) out_shape = {1};
  auto d = x.data();
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.extent; ++i)
      for (std::size_t in = 0; in < s.inner; ++in)
        out[o * s.inner + in] += d[(o * s.extent + i) * s.inner + in];
  return detail::make_result(std::move(out_shape), std::move(out), {x}, [s](Node& self) {
    auto& gX = input(self, 0).grad_buffer();
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < s.extent; ++i)
        for (std::size_t in = 0; in < s.inner; ++in)
          gX[(o * s.extent + i) * s.inner + in] += self.grad[o * s.inner + in];
  });
}

Tensor mean(const Tensor& x, std::size_t axis) {
  const auto extent = x.dim(axis);
  return scale(sum(x, axis), 1.0 / static_cast<double>(extent));
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  Shape out_shape = parts.front().shape();
  if (axis >= out_shape.size()) {
    throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(out_shape));
  }
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const auto& ps = p.shape();
    bool ok = ps.size() == out_shape.size();
    for (std::size_t i = 0; ok && i < ps.size(); ++i)
      if (i != axis && ps[i] != out_shape[i]) ok = false;
    if (!ok) {
      throw DimensionError("concat: " + shape_str(parts.front().shape()) + " and " +
                           shape_str(ps) + " disagree off axis " + std::to_string(axis));
    }
    out_shape[axis] += ps[axis];
  }
  const auto s = split_axis(out_shape, axis, "concat");
  std::vector<std::size_t> extents;
  std::vector<double> out(shape_numel(out_shape));
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto e = p.dim(axis);
    extents.push_back(e);
    auto d = p.data();
    for (std::size_t o = 0; o < s.outer; ++o)
      std::copy_n(d.begin() + static_cast<std::ptrdiff_t>(o * e * s.inner), e * s.inner,
                  out.begin() + static_cast<std::ptrdiff_t>((o * s.extent + offset) * s.inner));
    offset += e;
  }
  return detail::make_result(std::move(out_shape), std::move(out), parts,
                             [s, extents](Node& self) {
                               std::size_t off = 0;
                               for (std::size_t k = 0; k < extents.size(); ++k) {
                                 auto& P = input(self, k);
                                 const auto e = extents[k];
                                 if (P.requires_grad) {
                                   auto& gP = P.grad_buffer();
                                   for (std::size_t o = 0; o < s.outer; ++o)
                                     for (std::size_t r = 0; r < e * s.inner; ++r)
                                       gP[o * e * s.inner + r] +=
                                           self.grad[(o * s.extent + off) * s.inner + r];
                                 }
                                 off += e;
                               }
                             });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const auto s = split_axis(x.shape(), axis, "slice");
  if (begin > end || end > s.extent) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid on axis " + std::to_string(axis) + " of " +
                         shape_str(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  const auto e = end - begin;
  auto d = x.data();
  std::vector<double> out(s.outer * e * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o)
    std::copy_n(d.begin() + static_cast<std::ptrdiff_t>((o * s.extent + begin) * s.inner),
                e * s.inner, out.begin() + static_cast<std::ptrdiff_t>(o * e * s.inner));
  return detail::make_result(std::move(out_shape), std::move(out), {x},
                             [s, begin, e](Node& self) {
                               auto& gX = input(self, 0).grad_buffer();
                               for (std::size_t o = 0; o < s.outer; ++o)
                                 for (std::size_t r = 0; r < e * s.inner; ++r)
                                   gX[(o * s.extent + begin) * s.inner + r] +=
                                       self.grad[o * e * s.inner + r];
                             });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> rows) {
  require_rank2(table, "gather_rows");
  const auto n = table.dim(0);
  const auto w = table.dim(1);
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  auto d = table.data();
  std::vector<double> out(idx.size() * w);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= n) {
      throw DimensionError("gather_rows: row " + std::to_string(idx[r]) + " out of range for " +
                           shape_str(table.shape()));
    }
    std::copy_n(d.begin() + static_cast<std::ptrdiff_t>(idx[r] * w), w,
                out.begin() + static_cast<std::ptrdiff_t>(r * w));
  }
  return detail::make_result({idx.size(), w}, std::move(out), {table}, [idx, w](Node& self) {
    auto& gT = input(self, 0).grad_buffer();
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < w; ++j) gT[idx[r] * w + j] += self.grad[r * w + j];
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const auto n = x.shape().back();
  if (gamma.numel() != n || beta.numel() != n) {
    throw DimensionError("layer_norm: input " + shape_str(x.shape()) + " with gamma " +
                         shape_str(gamma.shape()) + " and beta " + shape_str(beta.shape()));
  }
  const auto rows = x.numel() / n;
  auto d = x.data();
  auto g = gamma.data();
  auto b = beta.data();
  std::vector<double> out(d.size());
  // xhat and 1/sigma are needed by the adjoint.
  auto xhat = std::make_shared<std::vector<double>>(d.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = d.data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (row[j] - mu) * is;
      (*xhat)[r * n + j] = h;
      out[r * n + j] = h * g[j] + b[j];
    }
  }
  return detail::make_result(x.shape(), std::move(out), {x, gamma, beta},
                             [rows, n, xhat, inv_std](Node& self) {
                               auto& X = input(self, 0);
                               auto& G = input(self, 1);
                               auto& B = input(self, 2);
                               const auto& dy = self.grad;
                               if (G.requires_grad || B.requires_grad) {
                                 auto& gG = G.grad_buffer();
                                 auto& gB = B.grad_buffer();
                                 for (std::size_t r = 0; r < rows; ++r)
                                   for (std::size_t j = 0; j < n; ++j) {
                                     gG[j] += dy[r * n + j] * (*xhat)[r * n + j];
                                     gB[j] += dy[r * n + j];
                                   }
                               }
                               if (X.requires_grad) {
                                 auto& gX = X.grad_buffer();
                                 const double inv_n = 1.0 / static_cast<double>(n);
                                 for (std::size_t r = 0; r < rows; ++r) {
                                   double sum_g = 0.0, sum_gh = 0.0;
                                   for (std::size_t j = 0; j < n; ++j) {
                                     const double gh = dy[r * n + j] * G.value[j];
                                     sum_g += gh;
                                     sum_gh += gh * (*xhat)[r * n + j];
                                   }
                                   for (std::size_t j = 0; j < n; ++j) {
                                     const double gh = dy[r * n + j] * G.value[j];
                                     gX[r * n + j] +=
                                         (*inv_std)[r] *
                                         (gh - inv_n * sum_g - (*xhat)[r * n + j] * inv_n * sum_gh);
                                   }
                                 }
                               }
                             });
}

Tensor l2_normalize(const Tensor& x) {
  const auto n = x.shape().back();
  const auto rows = x.numel() / n;
  auto d = x.data();
  std::vector<double> out(d.size());
  auto norms = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double ss = 0.0;
    for (std::size_t j = 0; j < n; ++j) ss += d[r * n + j] * d[r * n + j];
    const double norm = std::sqrt(ss);
    if (!(norm > 0.0)) {
      throw DegenerateInputError("l2_normalize: row " + std::to_string(r) +
                                 " has zero norm; cosine similarity is undefined");
    }
    (*norms)[r] = norm;
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = d[r * n + j] / norm;
  }
  return detail::make_result(x.shape(), std::move(out), {x}, [rows, n, norms](Node& self) {
    auto& gX = input(self, 0).grad_buffer();
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[r * n + j] * y[r * n + j];
      for (std::size_t j = 0; j < n; ++j)
        gX[r * n + j] += (g[r * n + j] - y[r * n + j] * dot) / (*norms)[r];
    }
  });
}

Tensor dropout(const Tensor& x, double rate, bool training, Rng* rng) {
  if (!training || rate <= 0.0) return x;
  if (rate >= 1.0) throw ContractError("dropout: rate must be < 1");
  if (rng == nullptr) throw ContractError("dropout: training mode needs an Rng");
  const double keep = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.numel());
  for (auto& m : mask) m = rng->uniform() < rate ? 0.0 : keep;
  return mul(x, Tensor(x.shape(), std::move(mask)));
}

}  // namespace vlcap
