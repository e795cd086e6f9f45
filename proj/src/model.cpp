#include "onelayer/model.hpp"

#include <algorithm>
#include <random>
#include <string>

namespace onelayer::model {

std::size_t MlpSpec::neuron_count() const {
  std::size_t total = 0;
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) total += layers[i].weight.rows;
  return total;
}

void MlpSpec::validate() const {
  if (layers.empty()) throw SpecError("MLP needs at least one layer");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    if (layer.weight.rows == 0 || layer.weight.cols == 0) {
      throw SpecError("MLP layer " + std::to_string(i) + " is empty");
    }
    if (layer.weight.data.size() != layer.weight.rows * layer.weight.cols) {
      throw SpecError("MLP layer " + std::to_string(i) + " weight storage mismatch");
    }
    if (layer.bias.size() != layer.weight.rows) {
      throw SpecError("MLP layer " + std::to_string(i) + " bias length mismatch");
    }
    if (i > 0 && layer.weight.cols != layers[i - 1].weight.rows) {
      throw SpecError("MLP layer " + std::to_string(i) + " does not compose with the previous one");
    }
  }
  if (layers.back().weight.rows != 1) throw SpecError("MLP must end in a single output");
}

std::size_t TransformerSpec::symbol_index(Symbol s) const {
  auto it = std::find(sigma.begin(), sigma.end(), s);
  if (it == sigma.end()) throw InputError("symbol " + std::to_string(s) + " is not in the alphabet");
  return static_cast<std::size_t>(it - sigma.begin());
}

const Vector& TransformerSpec::encoding(int position, Symbol s) const {
  return pos_encoding[static_cast<std::size_t>(position - 1) * sigma.size() + symbol_index(s)];
}

Vector& TransformerSpec::encoding(int position, Symbol s) {
  return pos_encoding[static_cast<std::size_t>(position - 1) * sigma.size() + symbol_index(s)];
}

void TransformerSpec::validate() const {
  precision.validate();
  if (n < 1) throw SpecError("n must be positive");
  if (d < 1) throw SpecError("d must be positive");
  if (sigma.empty()) throw SpecError("alphabet is empty");
  auto sorted = sigma;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw SpecError("alphabet has duplicate symbols");
  }
  const auto ud = static_cast<std::size_t>(d);
  if (pos_encoding.size() != static_cast<std::size_t>(n) * sigma.size()) {
    throw SpecError("positional encoding must have n * |sigma| rows");
  }
  for (const auto& row : pos_encoding) {
    if (row.size() != ud) throw SpecError("positional encoding row has wrong dimension");
  }
  if (h.size() != ud) throw SpecError("h has wrong dimension");
  for (const Matrix* m : {&K, &Q}) {
    if (m->rows != ud || m->cols != ud || m->data.size() != ud * ud) {
      throw SpecError("K and Q must be d x d");
    }
  }
  mlp.validate();
  if (mlp.input_dim() != ud) throw SpecError("MLP input dimension must equal d");
}

void TransformerSpec::validate_word(std::span<const Symbol> word) const {
  if (word.size() != static_cast<std::size_t>(n)) {
    throw InputError("word has length " + std::to_string(word.size()) + ", expected " +
                     std::to_string(n));
  }
  for (Symbol s : word) symbol_index(s);
}

std::vector<Vector> embed(const TransformerSpec& spec, std::span<const Symbol> word) {
  spec.validate_word(word);
  std::vector<Vector> tokens;
  tokens.reserve(word.size());
  for (std::size_t i = 0; i < word.size(); ++i) {
    tokens.push_back(spec.encoding(static_cast<int>(i) + 1, word[i]));
  }
  return tokens;
}

Vector query(const TransformerSpec& spec) { return numerics::matvec(spec.Q, spec.h); }

Scalar attention_score(const TransformerSpec& spec, std::span<const Scalar> token,
                       std::span<const Scalar> query_vec) {
  return numerics::dot(numerics::matvec(spec.K, token), query_vec);
}

Vector attention_scores(const TransformerSpec& spec, std::span<const Vector> tokens) {
  const Vector q = query(spec);
  Vector scores;
  scores.reserve(tokens.size());
  for (const auto& f : tokens) scores.push_back(attention_score(spec, f, q));
  return scores;
}

Vector pool(const TransformerSpec& spec, std::span<const Vector> tokens,
            std::span<const Scalar> scores) {
  const auto& cfg = spec.precision;
  if (tokens.empty() || tokens.size() != scores.size()) {
    throw std::invalid_argument("pool: tokens and scores must be nonempty and aligned");
  }
  Scalar shift = Scalar::zero(cfg);
  if (cfg.stable_softmax) {
    shift = scores[0];
    for (const auto& s : scores) shift = numerics::max(shift, s);
  }
  Vector numerator = numerics::zeros(static_cast<std::size_t>(spec.d), cfg);
  Scalar denominator = Scalar::zero(cfg);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Scalar e = numerics::exp(scores[i] - shift);
    if (e.is_inf()) throw NumericError("attention exponential overflowed");
    for (std::size_t c = 0; c < numerator.size(); ++c) numerator[c] += e * tokens[i][c];
    denominator += e;
  }
  if (denominator.is_inf()) throw NumericError("attention normalizer overflowed");
  if (denominator.is_zero()) throw NumericError("attention normalizer underflowed to zero");
  for (auto& v : numerator) v = v / denominator;
  return numerator;
}

Vector pooled(const TransformerSpec& spec, std::span<const Symbol> word) {
  const auto tokens = embed(spec, word);
  return pool(spec, tokens, attention_scores(spec, tokens));
}

Scalar mlp_eval(const MlpSpec& mlp, std::span<const Scalar> z) {
  if (mlp.layers.empty()) throw SpecError("MLP has no layers");
  if (z.size() != mlp.input_dim()) throw SpecError("MLP input dimension mismatch");
  Vector activ(z.begin(), z.end());
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    const auto& layer = mlp.layers[l];
    Vector next = numerics::matvec(layer.weight, activ);
    for (std::size_t r = 0; r < next.size(); ++r) next[r] += layer.bias[r];
    if (l + 1 < mlp.layers.size()) {
      for (auto& v : next) v = numerics::relu(v);
    }
    activ = std::move(next);
  }
  return activ.front();
}

bool decide(const Scalar& value) {
  if (value.is_nan()) throw NumericError("MLP output is NaN; no decision");
  return value.sign() > 0;
}

namespace {

Vector residual(const TransformerSpec& spec, const Vector& pooled_vec) {
  Vector z = spec.h;
  for (std::size_t c = 0; c < z.size(); ++c) z[c] += pooled_vec[c];
  return z;
}

}  // namespace

bool forward(const TransformerSpec& spec, std::span<const Symbol> word) {
  const Vector p = pooled(spec, word);
  return decide(mlp_eval(spec.mlp, residual(spec, p)));
}

ForwardTrace trace_forward(const TransformerSpec& spec, std::span<const Symbol> word) {
  ForwardTrace t;
  t.tokens = embed(spec, word);
  t.scores = attention_scores(spec, t.tokens);
  t.weights = numerics::softmax_weights(t.scores, spec.precision);
  t.pooled = pool(spec, t.tokens, t.scores);
  t.output = mlp_eval(spec.mlp, residual(spec, t.pooled));
  t.decision = decide(t.output);
  return t;
}

namespace {

Vector convert_all(const Vector& v, const PrecisionConfig& cfg) {
  Vector out;
  out.reserve(v.size());
  for (const auto& x : v) out.push_back(x.convert(cfg));
  return out;
}

Matrix convert_all(const Matrix& m, const PrecisionConfig& cfg) {
  return Matrix{m.rows, m.cols, convert_all(m.data, cfg)};
}

}  // namespace

TransformerSpec with_precision(const TransformerSpec& spec, const PrecisionConfig& cfg) {
  cfg.validate();
  TransformerSpec out;
  out.n = spec.n;
  out.sigma = spec.sigma;
  out.d = spec.d;
  out.precision = cfg;
  out.pos_encoding.reserve(spec.pos_encoding.size());
  for (const auto& row : spec.pos_encoding) out.pos_encoding.push_back(convert_all(row, cfg));
  out.h = convert_all(spec.h, cfg);
  out.K = convert_all(spec.K, cfg);
  out.Q = convert_all(spec.Q, cfg);
  for (const auto& layer : spec.mlp.layers) {
    out.mlp.layers.push_back({convert_all(layer.weight, cfg), convert_all(layer.bias, cfg)});
  }
  return out;
}

TransformerSpec random_spec(int n, std::vector<Symbol> sigma, int d,
                            std::span<const int> hidden, std::uint64_t seed,
                            const PrecisionConfig& cfg, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  auto draw = [&] { return Scalar::from_double(dist(rng), cfg); };
  auto draw_vec = [&](std::size_t size) {
    Vector v;
    v.reserve(size);
    for (std::size_t i = 0; i < size; ++i) v.push_back(draw());
    return v;
  };
  const auto ud = static_cast<std::size_t>(d);

  TransformerSpec spec;
  spec.n = n;
  spec.sigma = std::move(sigma);
  spec.d = d;
  spec.precision = cfg;
  for (std::size_t r = 0; r < static_cast<std::size_t>(n) * spec.sigma.size(); ++r) {
    spec.pos_encoding.push_back(draw_vec(ud));
  }
  spec.h = draw_vec(ud);
  spec.K = Matrix{ud, ud, draw_vec(ud * ud)};
  spec.Q = Matrix{ud, ud, draw_vec(ud * ud)};
  std::size_t in = ud;
  std::vector<int> widths(hidden.begin(), hidden.end());
  widths.push_back(1);
  for (int w : widths) {
    const auto out = static_cast<std::size_t>(w);
    spec.mlp.layers.push_back({Matrix{out, in, draw_vec(out * in)}, draw_vec(out)});
    in = out;
  }
  spec.validate();
  return spec;
}

MlpSpec constant_mlp(int d, double value, const PrecisionConfig& cfg) {
  MlpSpec mlp;
  mlp.layers.push_back({Matrix::zeros(1, static_cast<std::size_t>(d), cfg),
                        Vector{Scalar::from_double(value, cfg)}});
  return mlp;
}

}  // namespace onelayer::model
