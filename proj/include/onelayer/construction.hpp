#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "onelayer/model.hpp"

namespace onelayer::construction {

using model::TransformerSpec;
using model::Word;
using numerics::PrecisionConfig;
using numerics::Scalar;

struct PalindromeOptions {
  int base = 10;
  /// Accept odd n by giving the middle position coefficient 0.
  bool allow_odd = false;
};

/// Constant-size palindrome recognizer: d = 2, K = Q = 0 (uniform
/// attention), h = 0, and a 2-neuron MLP computing tau' - |z_1|.
///
/// Coordinate 1 of p(j, x) is  base^-(j-1) * x  for j <= k  and
/// -base^-(n-j) * x  for j > n - k, so the pooled first coordinate is s / n
/// with s = sum_i base^-(i-1) (a_i - b_i).
struct PalindromeSpec {
  int n = 0;
  int base = 10;
  Scalar tau_prime;
  TransformerSpec transformer;

  int pairs() const { return n / 2; }
};

PalindromeSpec build_palindrome_transformer(int n, const PrecisionConfig& cfg,
                                            PalindromeOptions options = {});

/// The 2-neuron zero test tau' - ReLU(z_1) - ReLU(-z_1) on a d-dimensional input.
model::MlpSpec zero_test_mlp(int d, const Scalar& tau_prime, const PrecisionConfig& cfg);

/// Analytic lower bound (1 - 1/(base-1)) * base^-(k-1) on |s| over
/// non-palindromes of even length n.
Scalar min_nonzero_margin(int n, int base, const PrecisionConfig& cfg);

/// s = sum_{i<=k} base^-(i-1) (x_i - x_{n+1-i}) evaluated in `cfg`.
Scalar weighted_difference(std::span<const int> word, int base, const PrecisionConfig& cfg);

struct PrecisionWitness {
  int n = 0;
  int bits_low = 0;
  int bits_high = 0;
  Word word;
  /// n * pooled_1 under each precision, i.e. the realized s.
  Scalar s_low;
  Scalar s_high;
  bool verdict_low = false;
  bool verdict_high = false;
};

struct SearchOptions {
  int base = 10;
  /// Random words tried per n, in addition to the directed candidates.
  int random_words = 64;
  std::uint64_t seed = 1;
};

/// Directed candidates for one n: palindromes (all-zero, all-one, alternating,
/// a few seeded random ones), each with its innermost pair flipped.
std::vector<Word> directed_candidates(int n, std::uint64_t seed);

/// Words where forward() under `low` disagrees with forward() under the
/// precision `high(n)`. Empty is a valid result.
std::vector<PrecisionWitness> precision_failure_search(
    std::span<const int> ns, const PrecisionConfig& low,
    const std::function<PrecisionConfig(int)>& high, const SearchOptions& options = {});

/// Fixed high precision; requires high.mantissa_bits >= 4n for every n.
std::vector<PrecisionWitness> precision_failure_search(std::span<const int> ns,
                                                       const PrecisionConfig& low,
                                                       const PrecisionConfig& high,
                                                       const SearchOptions& options = {});

std::string witnesses_csv(std::span<const PrecisionWitness> witnesses);

struct VerificationSummary {
  std::uint64_t checked = 0;
  std::uint64_t correct = 0;
  bool exhaustive = false;
  std::vector<Word> failures;
};

/// Compares forward() with pal_eval over all 2^n words (n <= 16) or over
/// `samples` seeded random words plus every directed candidate otherwise.
VerificationSummary verify_palindrome(const PalindromeSpec& spec, std::uint64_t samples = 4096,
                                      std::uint64_t seed = 1);

}  // namespace onelayer::construction
