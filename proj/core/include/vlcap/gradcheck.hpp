#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vlcap/nn.hpp"

namespace vlcap {

struct GradcheckEntry {
  std::string name;
  std::size_t size = 0;
  // ||analytic - numeric|| / max(||analytic||, ||numeric||), per tensor.
  double rel_error = 0.0;
  double max_abs_diff = 0.0;
  double grad_norm = 0.0;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double max_rel_error = 0.0;
  double seconds = 0.0;

  bool passed(double tolerance) const { return max_rel_error < tolerance; }
  std::string to_json() const;
};

// Central differences with step eps for every entry of every parameter,
// against one backward pass of loss_fn. loss_fn must be deterministic.
GradcheckReport check_gradients(const std::vector<NamedParameter>& params,
                                const std::function<Tensor()>& loss_fn, double eps = 1e-5);

// The reference suite: a 2-layer, 2-head, d_model 16 model on a three-event
// synthetic video, total loss (label-smoothed MLE + contrastive term).
GradcheckReport model_gradcheck(std::uint64_t seed = 0, double eps = 1e-5);

}  // namespace vlcap
