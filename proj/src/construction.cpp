#include "onelayer/construction.hpp"

#include <random>
#include <sstream>
#include <stdexcept>

#include "onelayer/tasks.hpp"

namespace onelayer::construction {

using numerics::Matrix;
using numerics::Vector;

model::MlpSpec zero_test_mlp(int d, const Scalar& tau_prime, const PrecisionConfig& cfg) {
  const auto ud = static_cast<std::size_t>(d);
  Matrix hidden = Matrix::zeros(2, ud, cfg);
  hidden.at(0, 0) = Scalar::one(cfg);
  hidden.at(1, 0) = -Scalar::one(cfg);
  Matrix out = Matrix::zeros(1, 2, cfg);
  out.at(0, 0) = -Scalar::one(cfg);
  out.at(0, 1) = -Scalar::one(cfg);
  model::MlpSpec mlp;
  mlp.layers.push_back({std::move(hidden), numerics::zeros(2, cfg)});
  mlp.layers.push_back({std::move(out), Vector{tau_prime}});
  return mlp;
}

PalindromeSpec build_palindrome_transformer(int n, const PrecisionConfig& cfg,
                                            PalindromeOptions options) {
  cfg.validate();
  if (n < 1) throw std::invalid_argument("palindrome construction needs n >= 1");
  if (n % 2 != 0 && !options.allow_odd) {
    throw std::invalid_argument("palindrome construction needs even n");
  }
  if (options.base < 2) throw std::invalid_argument("base must be at least 2");
  const int k = n / 2;
  constexpr int kDim = 2;

  PalindromeSpec out;
  out.n = n;
  out.base = options.base;

  TransformerSpec& t = out.transformer;
  t.n = n;
  t.sigma = {0, 1};
  t.d = kDim;
  t.precision = cfg;
  for (int j = 1; j <= n; ++j) {
    Scalar coefficient = Scalar::zero(cfg);
    if (j <= k) {
      coefficient = Scalar::pow_int(options.base, -(j - 1), cfg);
    } else if (j > n - k) {
      coefficient = -Scalar::pow_int(options.base, -(n - j), cfg);
    }
    // Symbol 0 contributes nothing; symbol 1 contributes the coefficient.
    t.pos_encoding.push_back(numerics::zeros(kDim, cfg));
    t.pos_encoding.push_back(Vector{coefficient, Scalar::zero(cfg)});
  }
  t.h = numerics::zeros(kDim, cfg);
  t.K = Matrix::zeros(kDim, kDim, cfg);
  t.Q = Matrix::zeros(kDim, kDim, cfg);

  out.tau_prime = Scalar::pow_int(options.base, -(k - 1), cfg) / Scalar::from_int(2L * n, cfg);
  t.mlp = zero_test_mlp(kDim, out.tau_prime, cfg);
  t.validate();
  return out;
}

Scalar min_nonzero_margin(int n, int base, const PrecisionConfig& cfg) {
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("margin bound needs even n >= 2");
  if (base <= 2) throw std::invalid_argument("margin bound degenerates for base <= 2");
  const int k = n / 2;
  const Scalar one = Scalar::one(cfg);
  const Scalar factor = one - one / Scalar::from_int(base - 1, cfg);
  return factor * Scalar::pow_int(base, -(k - 1), cfg);
}

Scalar weighted_difference(std::span<const int> word, int base, const PrecisionConfig& cfg) {
  const std::size_t n = word.size();
  Scalar s = Scalar::zero(cfg);
  for (std::size_t i = 0; i < n / 2; ++i) {
    const int diff = word[i] - word[n - 1 - i];
    if (diff != 0) {
      s += Scalar::from_int(diff, cfg) * Scalar::pow_int(base, -static_cast<long>(i), cfg);
    }
  }
  return s;
}

std::vector<Word> directed_candidates(int n, std::uint64_t seed) {
  std::vector<Word> palindromes;
  palindromes.push_back(Word(static_cast<std::size_t>(n), 0));
  palindromes.push_back(Word(static_cast<std::size_t>(n), 1));
  Word alternating(static_cast<std::size_t>(n));
  for (int i = 0; i < n / 2; ++i) {
    alternating[static_cast<std::size_t>(i)] = i % 2;
    alternating[static_cast<std::size_t>(n - 1 - i)] = i % 2;
  }
  palindromes.push_back(alternating);
  std::mt19937_64 rng(seed ^ (static_cast<std::uint64_t>(n) * 0x9e3779b97f4a7c15ULL));
  for (int r = 0; r < 4; ++r) {
    Word w(static_cast<std::size_t>(n));
    for (int i = 0; i < (n + 1) / 2; ++i) {
      const int bit = static_cast<int>(rng() & 1U);
      w[static_cast<std::size_t>(i)] = bit;
      w[static_cast<std::size_t>(n - 1 - i)] = bit;
    }
    palindromes.push_back(w);
  }
  std::vector<Word> out;
  for (const auto& p : palindromes) {
    out.push_back(p);
    if (n >= 2) {
      Word flipped = p;
      auto& inner = flipped[static_cast<std::size_t>(n / 2 - 1)];
      inner = 1 - inner;
      out.push_back(flipped);
    }
  }
  return out;
}

namespace {

Scalar realized_s(const model::ForwardTrace& trace, int n, const PrecisionConfig& cfg) {
  return trace.pooled[0] * Scalar::from_int(n, cfg);
}

}  // namespace

std::vector<PrecisionWitness> precision_failure_search(
    std::span<const int> ns, const PrecisionConfig& low,
    const std::function<PrecisionConfig(int)>& high, const SearchOptions& options) {
  std::vector<PrecisionWitness> witnesses;
  for (int n : ns) {
    const PrecisionConfig high_cfg = high(n);
    const auto spec_low = build_palindrome_transformer(n, low, {options.base});
    const auto spec_high = build_palindrome_transformer(n, high_cfg, {options.base});

    auto candidates = directed_candidates(n, options.seed);
    std::mt19937_64 rng(options.seed + static_cast<std::uint64_t>(n));
    for (int r = 0; r < options.random_words; ++r) {
      Word w(static_cast<std::size_t>(n));
      for (auto& x : w) x = static_cast<int>(rng() & 1U);
      candidates.push_back(std::move(w));
    }

    for (const auto& w : candidates) {
      const auto lo = model::trace_forward(spec_low.transformer, w);
      const auto hi = model::trace_forward(spec_high.transformer, w);
      if (lo.decision == hi.decision) continue;
      witnesses.push_back({n, low.bits(), high_cfg.bits(), w, realized_s(lo, n, low),
                           realized_s(hi, n, high_cfg), lo.decision, hi.decision});
    }
  }
  return witnesses;
}

std::vector<PrecisionWitness> precision_failure_search(std::span<const int> ns,
                                                       const PrecisionConfig& low,
                                                       const PrecisionConfig& high,
                                                       const SearchOptions& options) {
  for (int n : ns) {
    if (high.mode == numerics::Mode::kBigFloat && high.mantissa_bits < 4 * n) {
      throw std::invalid_argument("high precision must carry at least 4n mantissa bits");
    }
  }
  return precision_failure_search(
      ns, low, [&](int) { return high; }, options);
}

std::string witnesses_csv(std::span<const PrecisionWitness> witnesses) {
  std::ostringstream out;
  out << "n,mantissa_bits_low,witness_word,s_low,s_high,verdict_low,verdict_high\n";
  for (const auto& w : witnesses) {
    out << w.n << ',' << w.bits_low << ',';
    for (int x : w.word) out << x;
    out << ',' << w.s_low.to_string() << ',' << w.s_high.to_string() << ','
        << (w.verdict_low ? 1 : 0) << ',' << (w.verdict_high ? 1 : 0) << '\n';
  }
  return out.str();
}

VerificationSummary verify_palindrome(const PalindromeSpec& spec, std::uint64_t samples,
                                      std::uint64_t seed) {
  VerificationSummary summary;
  const int n = spec.n;
  auto check = [&](const Word& w) {
    ++summary.checked;
    if (model::forward(spec.transformer, w) == tasks::pal_eval(w)) {
      ++summary.correct;
    } else {
      summary.failures.push_back(w);
    }
  };
  if (n <= 16) {
    summary.exhaustive = true;
    Word w(static_cast<std::size_t>(n));
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
      for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = static_cast<int>((mask >> i) & 1U);
      check(w);
    }
    return summary;
  }
  for (const auto& w : directed_candidates(n, seed)) check(w);
  std::mt19937_64 rng(seed);
  for (std::uint64_t r = 0; r < samples; ++r) {
    Word w(static_cast<std::size_t>(n));
    for (auto& x : w) x = static_cast<int>(rng() & 1U);
    check(w);
  }
  return summary;
}

}  // namespace onelayer::construction
