#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "onelayer/experiments.hpp"

namespace onelayer::experiments {

using numerics::Matrix;
using numerics::PrecisionConfig;
using numerics::Scalar;
using numerics::Vector;

double Dataset::max_class_frequency() const {
  if (labels.empty()) return 0.0;
  const auto ones = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const auto total = static_cast<double>(labels.size());
  return std::max(ones, total - ones) / total;
}

Dataset make_dataset(tasks::Task task, int n, int sample_size, std::uint64_t seed) {
  Dataset data;
  data.task = task;
  data.n = n;
  data.sigma = tasks::alphabet(task, n, n);
  if (task == tasks::Task::kComp) {
    if (n < 2) throw std::invalid_argument("comp family needs n >= 2");
    if (n <= 10) {
      data.words = tasks::comp_special_family(n);
    } else {
      data.sampled = true;
      std::mt19937_64 rng(seed);
      std::uniform_int_distribution<int> a1_dist(2, n);
      for (int s = 0; s < sample_size; ++s) {
        const int a1 = a1_dist(rng);
        tasks::Word b;
        for (int i = 1; i < n; ++i) b.push_back(static_cast<int>(rng() & 1U) + 1);
        data.words.push_back(tasks::comp_special_word(n, a1, b));
      }
    }
    for (const auto& w : data.words) data.labels.push_back(tasks::comp_eval(w) ? 1 : 0);
  } else if (task == tasks::Task::kSum2) {
    if (n < 2 || n % 2 != 0) throw std::invalid_argument("sum2 family needs even n >= 2");
    const int k = n / 2;
    if (n <= 10) {
      data.words = tasks::sum2_special_family(k);
    } else {
      data.sampled = true;
      std::mt19937_64 rng(seed);
      for (int s = 0; s < sample_size; ++s) {
        tasks::Bits alpha(static_cast<std::size_t>(k));
        tasks::Bits beta(static_cast<std::size_t>(k));
        for (auto& x : alpha) x = static_cast<int>(rng() & 1U);
        for (auto& x : beta) x = static_cast<int>(rng() & 1U);
        data.words.push_back(tasks::sum2_encode(k, alpha, beta));
      }
    }
    for (const auto& w : data.words) data.labels.push_back(tasks::sum2_eval(w, n) ? 1 : 0);
  } else {
    throw std::invalid_argument("training supports the comp and sum2 families only");
  }
  return data;
}

int MlpShape::neurons() const {
  if (constant) return 0;
  int total = 0;
  for (int w : hidden) total += w;
  return total;
}

std::string MlpShape::label() const {
  if (constant) return "constant";
  if (hidden.empty()) return "linear";
  std::string out;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    if (i > 0) out += "x";
    out += std::to_string(hidden[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Flat parameter layout

namespace {

struct LayerSlots {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t weight = 0;
  std::size_t bias = 0;
};

struct Layout {
  std::size_t n = 0;
  std::size_t symbols = 0;
  std::size_t d = 0;
  std::size_t pos = 0;
  std::size_t h = 0;
  std::size_t K = 0;
  std::size_t Q = 0;
  std::vector<LayerSlots> layers;
  std::size_t total = 0;

  static Layout of(const TransformerSpec& spec) {
    Layout lay;
    lay.n = static_cast<std::size_t>(spec.n);
    lay.symbols = spec.sigma.size();
    lay.d = static_cast<std::size_t>(spec.d);
    std::size_t offset = 0;
    lay.pos = offset;
    offset += lay.n * lay.symbols * lay.d;
    lay.h = offset;
    offset += lay.d;
    lay.K = offset;
    offset += lay.d * lay.d;
    lay.Q = offset;
    offset += lay.d * lay.d;
    for (const auto& layer : spec.mlp.layers) {
      LayerSlots slots{layer.weight.cols, layer.weight.rows, offset, 0};
      offset += slots.in * slots.out;
      slots.bias = offset;
      offset += slots.out;
      lay.layers.push_back(slots);
    }
    lay.total = offset;
    return lay;
  }
};

struct Scratch {
  std::vector<double> u, tokens_g, scores, e, hh, z, kt_u, dhh, du;
  std::vector<std::vector<double>> acts, pres;
  std::vector<double> dact, dpre;
};

/// Accumulates sum_j a[j] * b[j] in index order, first product first.
double ordered_dot(const double* a, const double* b, std::size_t len) {
  double acc = a[0] * b[0];
  for (std::size_t j = 1; j < len; ++j) acc += a[j] * b[j];
  return acc;
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Loss, accuracy and (when grad != nullptr) gradient over the dataset.
Evaluation evaluate(const Layout& lay, const std::vector<double>& w,
                    const std::vector<std::vector<std::size_t>>& symbol_rows,
                    const std::vector<int>& labels, std::vector<double>* grad) {
  const std::size_t d = lay.d;
  const std::size_t n = lay.n;
  const double* h = &w[lay.h];
  const double* K = &w[lay.K];
  const double* Q = &w[lay.Q];
  if (grad) grad->assign(lay.total, 0.0);
  const double inv_batch = 1.0 / static_cast<double>(labels.size());

  Scratch s;
  s.u.resize(d);
  for (std::size_t a = 0; a < d; ++a) s.u[a] = ordered_dot(Q + a * d, h, d);
  s.tokens_g.resize(n * d);
  s.scores.resize(n);
  s.e.resize(n);
  s.hh.resize(d);
  s.z.resize(d);
  s.kt_u.assign(d, 0.0);
  s.dhh.resize(d);
  s.du.resize(d);
  // K^T u is the same for every token.
  for (std::size_t b = 0; b < d; ++b) {
    double acc = 0.0;
    for (std::size_t a = 0; a < d; ++a) acc += K[a * d + b] * s.u[a];
    s.kt_u[b] = acc;
  }

  Evaluation ev;
  std::size_t correct = 0;
  for (std::size_t wi = 0; wi < labels.size(); ++wi) {
    const auto& rows = symbol_rows[wi];
    auto token = [&](std::size_t i) { return &w[lay.pos + rows[i] * d]; };

    double shift = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* f = token(i);
      double* g = &s.tokens_g[i * d];
      for (std::size_t a = 0; a < d; ++a) g[a] = ordered_dot(K + a * d, f, d);
      s.scores[i] = ordered_dot(g, s.u.data(), d);
      shift = i == 0 ? s.scores[i] : std::max(shift, s.scores[i]);
    }
    double den = 0.0;
    std::fill(s.hh.begin(), s.hh.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      s.e[i] = std::exp(s.scores[i] - shift);
      const double* f = token(i);
      for (std::size_t c = 0; c < d; ++c) s.hh[c] += s.e[i] * f[c];
      den += s.e[i];
    }
    for (std::size_t c = 0; c < d; ++c) {
      s.hh[c] /= den;
      s.z[c] = h[c] + s.hh[c];
    }

    s.acts.resize(lay.layers.size() + 1);
    s.pres.resize(lay.layers.size());
    s.acts[0] = s.z;
    for (std::size_t l = 0; l < lay.layers.size(); ++l) {
      const auto& L = lay.layers[l];
      auto& pre = s.pres[l];
      pre.resize(L.out);
      for (std::size_t r = 0; r < L.out; ++r) {
        pre[r] = ordered_dot(&w[L.weight + r * L.in], s.acts[l].data(), L.in) + w[L.bias + r];
      }
      auto& act = s.acts[l + 1];
      act = pre;
      if (l + 1 < lay.layers.size()) {
        for (auto& v : act) v = std::max(v, 0.0);
      }
    }
    const double output = s.acts.back()[0];
    const int label = labels[wi];
    const double y = label ? 1.0 : -1.0;
    ev.loss += softplus(-y * output) * inv_batch;
    if ((output > 0.0) == (label == 1)) ++correct;
    if (!grad) continue;

    // Backward through the MLP.
    auto& gw = *grad;
    s.dpre.assign(1, -y * sigmoid(-y * output) * inv_batch);
    for (std::size_t l = lay.layers.size(); l-- > 0;) {
      const auto& L = lay.layers[l];
      const auto& input = s.acts[l];
      s.dact.assign(L.in, 0.0);
      for (std::size_t r = 0; r < L.out; ++r) {
        const double g = s.dpre[r];
        if (g == 0.0) continue;
        gw[L.bias + r] += g;
        for (std::size_t c = 0; c < L.in; ++c) {
          gw[L.weight + r * L.in + c] += g * input[c];
          s.dact[c] += w[L.weight + r * L.in + c] * g;
        }
      }
      if (l > 0) {
        s.dpre.resize(L.in);
        for (std::size_t c = 0; c < L.in; ++c) s.dpre[c] = s.pres[l - 1][c] > 0.0 ? s.dact[c] : 0.0;
      }
    }
    // z = h + h-hat.
    for (std::size_t c = 0; c < d; ++c) {
      gw[lay.h + c] += s.dact[c];
      s.dhh[c] = s.dact[c];
    }
    const double centered = ordered_dot(s.dhh.data(), s.hh.data(), d);
    std::fill(s.du.begin(), s.du.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* f = token(i);
      const double weight = s.e[i] / den;
      const double dscore = weight * (ordered_dot(s.dhh.data(), f, d) - centered);
      double* df = &gw[lay.pos + rows[i] * d];
      for (std::size_t c = 0; c < d; ++c) df[c] += weight * s.dhh[c] + dscore * s.kt_u[c];
      const double* g = &s.tokens_g[i * d];
      for (std::size_t a = 0; a < d; ++a) {
        s.du[a] += dscore * g[a];
        for (std::size_t b = 0; b < d; ++b) gw[lay.K + a * d + b] += dscore * s.u[a] * f[b];
      }
    }
    // u = Q h.
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) {
        gw[lay.Q + a * d + b] += s.du[a] * h[b];
        gw[lay.h + b] += Q[a * d + b] * s.du[a];
      }
    }
  }
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  return ev;
}

std::vector<std::vector<std::size_t>> symbol_rows_of(const TransformerSpec& spec,
                                                     const Dataset& data) {
  std::vector<std::vector<std::size_t>> out;
  out.reserve(data.words.size());
  const std::size_t symbols = spec.sigma.size();
  for (const auto& word : data.words) {
    spec.validate_word(word);
    std::vector<std::size_t> rows;
    rows.reserve(word.size());
    for (std::size_t i = 0; i < word.size(); ++i) rows.push_back(i * symbols + spec.symbol_index(word[i]));
    out.push_back(std::move(rows));
  }
  return out;
}

}  // namespace

std::vector<double> flatten(const TransformerSpec& spec) {
  std::vector<double> out;
  for (const auto& row : spec.pos_encoding) {
    for (const auto& x : row) out.push_back(x.to_double());
  }
  for (const auto& x : spec.h) out.push_back(x.to_double());
  for (const auto& x : spec.K.data) out.push_back(x.to_double());
  for (const auto& x : spec.Q.data) out.push_back(x.to_double());
  for (const auto& layer : spec.mlp.layers) {
    for (const auto& x : layer.weight.data) out.push_back(x.to_double());
    for (const auto& x : layer.bias) out.push_back(x.to_double());
  }
  return out;
}

TransformerSpec unflatten(const TransformerSpec& shape, std::span<const double> params,
                          const PrecisionConfig& cfg) {
  const Layout lay = Layout::of(shape);
  if (params.size() != lay.total) throw std::invalid_argument("parameter vector has the wrong size");
  std::size_t cursor = 0;
  auto next = [&] { return Scalar::from_double(params[cursor++], cfg); };
  TransformerSpec out = shape;
  out.precision = cfg;
  for (auto& row : out.pos_encoding) {
    for (auto& x : row) x = next();
  }
  for (auto& x : out.h) x = next();
  for (auto& x : out.K.data) x = next();
  for (auto& x : out.Q.data) x = next();
  for (auto& layer : out.mlp.layers) {
    for (auto& x : layer.weight.data) x = next();
    for (auto& x : layer.bias) x = next();
  }
  return out;
}

LossGradient loss_and_gradient(const TransformerSpec& spec, const Dataset& data) {
  if (spec.precision.mode != numerics::Mode::kDouble) {
    throw std::invalid_argument("gradients are computed in hardware-double mode");
  }
  const Layout lay = Layout::of(spec);
  const auto rows = symbol_rows_of(spec, data);
  const auto params = flatten(spec);
  LossGradient out;
  const auto ev = evaluate(lay, params, rows, data.labels, &out.gradient);
  out.loss = ev.loss;
  out.accuracy = ev.accuracy;
  return out;
}

TransformerSpec initial_spec(const TrainConfig& cfg, const std::vector<model::Symbol>& sigma) {
  const double radius = 1.0 / std::sqrt(static_cast<double>(cfg.d));
  const auto hw = PrecisionConfig::hardware();
  if (cfg.mlp.constant) {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> dist(-radius, radius);
    const std::vector<int> none;
    auto spec = model::random_spec(cfg.n, sigma, cfg.d, none, cfg.seed, hw, radius);
    auto& out = spec.mlp.layers.back();
    for (auto& x : out.weight.data) x = Scalar::zero(hw);
    out.bias[0] = Scalar::from_double(dist(rng), hw);
    return spec;
  }
  return model::random_spec(cfg.n, sigma, cfg.d, cfg.mlp.hidden, cfg.seed, hw, radius);
}

TrainResult train(const TrainConfig& cfg) {
  return train(cfg, make_dataset(cfg.task, cfg.n, cfg.sample_size, cfg.seed));
}

TrainResult train(const TrainConfig& cfg, const Dataset& data) {
  if (cfg.steps < 0) throw std::invalid_argument("steps must be non-negative");
  if (cfg.d < 1) throw std::invalid_argument("d must be positive");
  if (data.words.empty()) throw std::invalid_argument("dataset is empty");
  const TransformerSpec shape = initial_spec(cfg, data.sigma);
  const Layout lay = Layout::of(shape);
  const auto rows = symbol_rows_of(shape, data);

  std::vector<double> params = flatten(shape);
  std::vector<double> best = params;
  std::vector<double> grad;
  TrainResult result;
  double best_accuracy = -1.0;

  for (int step = 0; step <= cfg.steps; ++step) {
    const auto ev = evaluate(lay, params, rows, data.labels, &grad);
    if (!std::isfinite(ev.loss)) {
      result.diverged = true;
      result.error = "loss diverged at step " + std::to_string(step);
      break;
    }
    if (step == 0) result.initial_accuracy = ev.accuracy;
    if (ev.accuracy > best_accuracy) {
      best_accuracy = ev.accuracy;
      best = params;
      result.best_step = step;
    }
    result.final_loss = ev.loss;
    if (step == cfg.steps) break;
    if (cfg.mlp.constant) {
      const auto& out = lay.layers.back();
      std::fill_n(grad.begin() + static_cast<std::ptrdiff_t>(out.weight), out.in * out.out, 0.0);
    }
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= cfg.learning_rate * grad[i];
  }
  result.accuracy = std::max(best_accuracy, 0.0);
  result.spec = unflatten(shape, best, PrecisionConfig::hardware());
  return result;
}

}  // namespace onelayer::experiments
