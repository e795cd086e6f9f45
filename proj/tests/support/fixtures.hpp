#pragma once

#include <vector>

#include "onelayer/model.hpp"
#include "onelayer/tasks.hpp"

namespace onelayer::fixtures {

using model::MlpLayer;
using model::MlpSpec;
using model::TransformerSpec;
using numerics::Matrix;
using numerics::PrecisionConfig;
using numerics::Scalar;

inline Scalar num(double v, const PrecisionConfig& cfg) { return Scalar::from_double(v, cfg); }

/// d x d hidden layer scale * I with constant bias, then an all-ones output.
inline MlpSpec diagonal_threshold_mlp(int d, double scale, double bias, const PrecisionConfig& cfg) {
  MlpLayer hidden{Matrix::zeros(d, d, cfg), numerics::zeros(d, cfg)};
  for (int i = 0; i < d; ++i) {
    hidden.weight.at(i, i) = num(scale, cfg);
    hidden.bias[i] = num(bias, cfg);
  }
  MlpLayer out{Matrix::zeros(1, d, cfg), numerics::zeros(1, cfg)};
  for (int i = 0; i < d; ++i) out.weight.at(0, i) = Scalar::one(cfg);
  return MlpSpec{{hidden, out}};
}

/// Empty spec with zero table, h = 0, K = Q = 0 and no MLP.
inline TransformerSpec blank_spec(int n, std::vector<int> sigma, int d, const PrecisionConfig& cfg) {
  TransformerSpec spec;
  spec.n = n;
  spec.sigma = std::move(sigma);
  spec.d = d;
  spec.precision = cfg;
  spec.pos_encoding.assign(static_cast<std::size_t>(n) * spec.sigma.size(), numerics::zeros(d, cfg));
  spec.h = numerics::zeros(d, cfg);
  spec.K = Matrix::zeros(d, d, cfg);
  spec.Q = Matrix::zeros(d, d, cfg);
  return spec;
}

/// Computes comp_n on every word: d = n, uniform attention, position 1 puts
/// weight M on e_{a_1} (M + 1 when a_1 = 1), position j >= 2 holding symbol 1
/// adds e_j, and the MLP fires on the coordinate that exceeds M.
inline TransformerSpec exact_comp_spec(int n, const PrecisionConfig& cfg) {
  constexpr double kM = 2.0;
  auto spec = blank_spec(n, tasks::alphabet(tasks::Task::kComp, n), n, cfg);
  for (int a = 1; a <= n; ++a) {
    spec.encoding(1, a)[a - 1] = num(a == 1 ? kM + 1 : kM, cfg);
  }
  for (int j = 2; j <= n; ++j) spec.encoding(j, 1)[j - 1] = Scalar::one(cfg);
  spec.mlp = diagonal_threshold_mlp(n, n, -(kM + 0.5), cfg);
  return spec;
}

/// exact_comp_spec with p(j0, 1) zeroed: wrong whenever a_1 = j0 and b_{j0} = 1.
inline TransformerSpec broken_comp_spec(int n, int j0, const PrecisionConfig& cfg) {
  auto spec = exact_comp_spec(n, cfg);
  spec.encoding(j0, 1) = numerics::zeros(n, cfg);
  return spec;
}

/// Decides OR_i(alpha_i and beta_i) on sum2_encode words: d = k, position i
/// holding 2i and position k + i holding -2i both add e_i, and the MLP fires
/// on a coordinate that reaches 2.
inline TransformerSpec exact_sum2_spec(int k, const PrecisionConfig& cfg) {
  const int n = 2 * k;
  auto spec = blank_spec(n, tasks::alphabet(tasks::Task::kSum2, n, n), k, cfg);
  for (int i = 1; i <= k; ++i) {
    spec.encoding(i, 2 * i)[i - 1] = Scalar::one(cfg);
    spec.encoding(k + i, -2 * i)[i - 1] = Scalar::one(cfg);
  }
  spec.mlp = diagonal_threshold_mlp(k, n, -1.5, cfg);
  return spec;
}

/// exact_sum2_spec that ignores coordinate i0 of beta.
inline TransformerSpec broken_sum2_spec(int k, int i0, const PrecisionConfig& cfg) {
  auto spec = exact_sum2_spec(k, cfg);
  spec.encoding(k + i0, -2 * i0) = numerics::zeros(k, cfg);
  return spec;
}

/// d = 1, h = 0, N(z) = z. With points (x, 1) and params (-t, 0) the
/// hypotheses are the thresholds [x > t] on the line.
inline TransformerSpec threshold_spec(const PrecisionConfig& cfg) {
  auto spec = blank_spec(1, {0}, 1, cfg);
  MlpLayer out{Matrix::zeros(1, 1, cfg), numerics::zeros(1, cfg)};
  out.weight.at(0, 0) = Scalar::one(cfg);
  spec.mlp = MlpSpec{{out}};
  return spec;
}

}  // namespace onelayer::fixtures
