#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "onelayer/numerics.hpp"

namespace onelayer {

/// A TransformerSpec or MLP that is internally inconsistent.
class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A word that does not fit the spec (wrong length, foreign symbol).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace onelayer

namespace onelayer::model {

using numerics::Matrix;
using numerics::PrecisionConfig;
using numerics::Scalar;
using numerics::Vector;

using Symbol = int;
using Word = std::vector<Symbol>;

struct MlpLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

/// ReLU network R^d -> R: ReLU after every layer except the last, which has
/// a single output and no activation.
struct MlpSpec {
  std::vector<MlpLayer> layers;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols; }
  /// Total hidden units (the final output unit is not counted).
  std::size_t neuron_count() const;
  void validate() const;
};

/// The 1-layer single-token-output transformer. All Scalars are rounded to
/// `precision`; operations read stable_softmax from it.
struct TransformerSpec {
  int n = 0;
  std::vector<Symbol> sigma;
  int d = 0;
  /// Row (i - 1) * |sigma| + symbol_index(s) holds p(i, s).
  std::vector<Vector> pos_encoding;
  Vector h;
  Matrix K;
  Matrix Q;
  MlpSpec mlp;
  PrecisionConfig precision;

  /// Index of `s` in sigma; throws InputError if absent.
  std::size_t symbol_index(Symbol s) const;
  const Vector& encoding(int position, Symbol s) const;
  Vector& encoding(int position, Symbol s);
  void validate() const;
  void validate_word(std::span<const Symbol> word) const;
};

/// Every quantity the forward pass produces.
struct ForwardTrace {
  std::vector<Vector> tokens;  // f_1 .. f_n
  Vector scores;
  Vector weights;
  Vector pooled;  // h-hat
  Scalar output;  // N(h + h-hat)
  bool decision = false;
};

std::vector<Vector> embed(const TransformerSpec& spec, std::span<const Symbol> word);

/// Q h, shared by every token's score.
Vector query(const TransformerSpec& spec);
Scalar attention_score(const TransformerSpec& spec, std::span<const Scalar> token,
                       std::span<const Scalar> query_vec);
Vector attention_scores(const TransformerSpec& spec, std::span<const Vector> tokens);

/// (sum_i e^{s_i} f_i) / (sum_i e^{s_i}).
Vector pooled(const TransformerSpec& spec, std::span<const Symbol> word);
Vector pool(const TransformerSpec& spec, std::span<const Vector> tokens,
            std::span<const Scalar> scores);

Scalar mlp_eval(const MlpSpec& mlp, std::span<const Scalar> z);

/// Strict sign rule: true iff value > 0. NaN is a NumericError.
bool decide(const Scalar& value);

bool forward(const TransformerSpec& spec, std::span<const Symbol> word);
ForwardTrace trace_forward(const TransformerSpec& spec, std::span<const Symbol> word);

/// Re-rounds every parameter into `cfg`.
TransformerSpec with_precision(const TransformerSpec& spec, const PrecisionConfig& cfg);

/// Random spec with entries uniform in [-scale, scale]; MLP hidden widths as
/// given. Deterministic per seed.
TransformerSpec random_spec(int n, std::vector<Symbol> sigma, int d,
                            std::span<const int> hidden, std::uint64_t seed,
                            const PrecisionConfig& cfg, double scale = 1.0);

/// MLP whose output is the constant `value` regardless of input.
MlpSpec constant_mlp(int d, double value, const PrecisionConfig& cfg);

}  // namespace onelayer::model
