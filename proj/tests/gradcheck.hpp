// Copyright 2026 The Stickergen Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Central-difference gradient checks, shared by the unit tests and the
// acceptance binary.

#pragma once

#include <cmath>
#include <string>

#include "stickergen/autodiff.hpp"

namespace stickergen::testing {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
};

/// `loss(grads)` returns the loss and, when `grads` is non-null, adds the
/// analytic gradient into it. Every scalar of every parameter is perturbed by
/// +-h; the error of a tensor is ||analytic - numeric|| / max(||analytic||,
/// ||numeric||), and tensors whose gradients are both below `floor` count as
/// matching.
template <typename Loss>
GradCheckResult gradient_check(ad::ParameterSet& params, Loss&& loss, double h = 1e-5, double floor = 1e-9) {
  ad::Gradients analytic(params);
  loss(&analytic);
  GradCheckResult res;
  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Matrix& w = params.value(i);
    ad::Matrix numeric(w.rows(), w.cols());
    for (Eigen::Index j = 0; j < w.size(); ++j) {
      const double keep = w.data()[j];
      w.data()[j] = keep + h;
      const double up = loss(nullptr);
      w.data()[j] = keep - h;
      const double down = loss(nullptr);
      w.data()[j] = keep;
      numeric.data()[j] = (up - down) / (2.0 * h);
      ++res.checked;
    }
    const double na = analytic[i].norm(), nn = numeric.norm();
    const double scale = std::max(na, nn);
    const double err = scale < floor ? 0.0 : (analytic[i] - numeric).norm() / scale;
    if (res.worst_parameter.empty() || err > res.max_relative_error) {
      res.max_relative_error = err;
      res.worst_parameter = params.name(i);
    }
  }
  return res;
}

}  // namespace stickergen::testing
