#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "onelayer/experiments.hpp"

namespace onelayer::oracle {

using experiments::Dataset;
using model::TransformerSpec;
using numerics::PrecisionConfig;
using numerics::Scalar;

/// Mean logistic loss evaluated through the model module in `cfg`.
inline Scalar reference_loss(const TransformerSpec& shape, const std::vector<double>& params,
                             const Dataset& data, const PrecisionConfig& cfg) {
  const auto spec = experiments::unflatten(shape, params, cfg);
  auto total = Scalar::zero(cfg);
  for (std::size_t i = 0; i < data.words.size(); ++i) {
    const auto out = model::trace_forward(spec, data.words[i]).output;
    const auto margin = data.labels[i] == 1 ? -out : out;
    total += log1p(exp(margin));
  }
  return total / Scalar::from_int(static_cast<long>(data.words.size()), cfg);
}

/// Central difference with step `h` on parameter `index`, losses at 128 bits.
/// The divisor is the exact distance between the two perturbed doubles.
inline double central_difference(const TransformerSpec& shape, const std::vector<double>& params,
                                 const Dataset& data, std::size_t index, double h = 1e-6) {
  const auto cfg = PrecisionConfig::bigfloat(128);
  auto plus = params;
  auto minus = params;
  plus[index] += h;
  minus[index] -= h;
  const auto rise = reference_loss(shape, plus, data, cfg) - reference_loss(shape, minus, data, cfg);
  return (rise / Scalar::from_double(plus[index] - minus[index], cfg)).to_double();
}

inline double relative_error(double a, double b) {
  const double scale = std::max(std::fabs(a), std::fabs(b));
  return scale == 0.0 ? 0.0 : std::fabs(a - b) / scale;
}

}  // namespace onelayer::oracle
