#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <random>

#include <gtest/gtest.h>

#include "onelayer/construction.hpp"
#include "onelayer/tasks.hpp"

using namespace onelayer;
using namespace onelayer::construction;
using model::Word;
using numerics::PrecisionConfig;
using numerics::Scalar;

namespace {

// s * base^(k-1) as an exact integer.
long long scaled_difference(const Word& w, int base) {
  const int n = static_cast<int>(w.size());
  const int k = n / 2;
  long long total = 0;
  for (int i = 0; i < k; ++i) total = total * base + (w[i] - w[n - 1 - i]);
  return total;
}

}  // namespace

TEST(Palindrome, Examples) {
  const auto spec = build_palindrome_transformer(4, PrecisionConfig::bigfloat(64));
  EXPECT_TRUE(model::forward(spec.transformer, Word{1, 0, 0, 1}));
  EXPECT_FALSE(model::forward(spec.transformer, Word{1, 1, 0, 0}));
  const auto cfg = PrecisionConfig::bigfloat(64);
  EXPECT_LE(std::abs(weighted_difference(Word{1, 1, 0, 0}, 10, cfg).to_double() - 1.1), 1e-15);
  const auto two = build_palindrome_transformer(2, PrecisionConfig::bigfloat(8));
  EXPECT_TRUE(model::forward(two.transformer, Word{0, 0}));
}

TEST(Palindrome, StructuralInvariants) {
  for (int n = 2; n <= 20; n += 2) {
    const auto cfg = PrecisionConfig::bigfloat(4 * n);
    const auto pal = build_palindrome_transformer(n, cfg);
    const auto& t = pal.transformer;
    EXPECT_EQ(t.d, 2);
    for (const auto& x : t.K.data) EXPECT_TRUE(x.is_zero());
    for (const auto& x : t.h) EXPECT_TRUE(x.is_zero());
    EXPECT_EQ(t.mlp.neuron_count(), 2u);
    EXPECT_GT(pal.tau_prime.sign(), 0);
    const int k = n / 2;
    const auto expected = Scalar::pow_int(10, -(k - 1), cfg) / Scalar::from_int(2 * n, cfg);
    EXPECT_TRUE(pal.tau_prime == expected);
  }
  EXPECT_THROW(build_palindrome_transformer(5, PrecisionConfig::hardware()), std::invalid_argument);
}

TEST(Palindrome, OddExtension) {
  for (int n = 1; n <= 11; n += 2) {
    const auto cfg = PrecisionConfig::bigfloat(4 * n + 8);
    const auto pal = build_palindrome_transformer(n, cfg, {10, true});
    for (std::uint64_t i = 0; i < (std::uint64_t{1} << n); ++i) {
      const auto w = tasks::bits_of(i, n);
      ASSERT_EQ(model::forward(pal.transformer, w), tasks::pal_eval(w)) << n;
    }
  }
}

TEST(Palindrome, ExhaustiveAtFourNBits) {
  for (int n = 2; n <= 12; n += 2) {
    const auto pal = build_palindrome_transformer(n, PrecisionConfig::bigfloat(4 * n));
    const auto summary = verify_palindrome(pal);
    EXPECT_TRUE(summary.exhaustive);
    EXPECT_EQ(summary.checked, std::uint64_t{1} << n);
    EXPECT_EQ(summary.correct, summary.checked) << n;
  }
}

TEST(Palindrome, DoubleIsEnoughForSmallN) {
  for (int n : {2, 8}) {
    const auto pal = build_palindrome_transformer(n, PrecisionConfig::hardware());
    const auto summary = verify_palindrome(pal);
    EXPECT_EQ(summary.correct, std::uint64_t{1} << n);
  }
}

TEST(Margin, Examples) {
  const auto cfg = PrecisionConfig::bigfloat(128);
  const auto m2 = min_nonzero_margin(2, 10, cfg);
  EXPECT_LE(std::abs(m2.to_double() - 8.0 / 9.0), 1e-30);
  const auto m4 = min_nonzero_margin(4, 10, cfg);
  EXPECT_LE(std::abs(m4.to_double() - 0.8 / 9.0), 1e-17);
  EXPECT_GE(std::abs(weighted_difference(Word{0, 1}, 10, cfg).to_double()), m2.to_double());
  EXPECT_LE(std::abs(std::abs(weighted_difference(Word{0, 1, 0, 0}, 10, cfg).to_double()) - 0.1), 1e-30);
  EXPECT_TRUE(weighted_difference(Word{1, 0, 0, 1}, 10, cfg).is_zero());
  EXPECT_THROW(min_nonzero_margin(4, 2, cfg), std::invalid_argument);
  EXPECT_THROW(min_nonzero_margin(3, 10, cfg), std::invalid_argument);
}

TEST(Margin, SeparationExhaustive) {
  for (int n = 2; n <= 16; n += 2) {
    const auto cfg = PrecisionConfig::bigfloat(4 * n);
    const double margin = min_nonzero_margin(n, 10, cfg).to_double();
    for (std::uint64_t i = 0; i < (std::uint64_t{1} << n); ++i) {
      const auto w = tasks::bits_of(i, n);
      const long long exact = scaled_difference(w, 10);
      ASSERT_EQ(exact == 0, tasks::pal_eval(w));
      const auto s = weighted_difference(w, 10, cfg);
      if (exact == 0) {
        ASSERT_TRUE(s.is_zero());
      } else {
        ASSERT_GE(std::abs(s.to_double()), margin) << n;
      }
    }
  }
}

// Correctness at P counts once the rounding error in the realized s is
// smaller than the distance from the exact s to the threshold n * tau'.
// Below that the verdict is noise and can flip either way.
TEST(Precision, MonotoneInBits) {
  std::mt19937_64 rng(41);
  const auto wide = PrecisionConfig::bigfloat(512);
  int lucky = 0;
  for (int n : {20, 28, 36}) {
    const int k = n / 2;
    const auto unit = Scalar::pow_int(10, k - 1, wide);
    std::vector<Word> words;
    for (int r = 0; r < 40; ++r) {
      Word w(static_cast<std::size_t>(n));
      for (auto& x : w) x = static_cast<int>(rng() & 1U);
      words.push_back(w);
      // A near-palindrome: mirror, then flip the innermost pair.
      for (int i = 0; i < n / 2; ++i) w[n - 1 - i] = w[i];
      w[n / 2] ^= 1;
      words.push_back(w);
    }
    for (const auto& w : words) {
      // s * 10^(k-1) is the integer S; the threshold sits at |S| = 1/2.
      std::int64_t big_s = 0;
      for (int i = 0; i < k; ++i) big_s = big_s * 10 + (w[i] - w[n - 1 - i]);
      const double gap = std::fabs(std::fabs(static_cast<double>(big_s)) - 0.5);
      bool certified_before = false;
      for (int bits = 8; bits <= 4 * n; bits += 8) {
        const auto cfg = PrecisionConfig::bigfloat(bits);
        const auto pal = build_palindrome_transformer(n, cfg);
        const auto trace = model::trace_forward(pal.transformer, w);
        const bool correct = model::decide(trace.output) == tasks::pal_eval(w);
        const auto realized = trace.pooled[0].convert(wide) *
                              Scalar::from_int(n, wide) * unit;
        const double error = std::fabs((realized - Scalar::from_int(big_s, wide)).to_double());
        if (certified_before) ASSERT_TRUE(correct) << n << " " << bits;
        if (correct && error < gap) certified_before = true;
        if (correct && !certified_before) ++lucky;
      }
      EXPECT_TRUE(certified_before);
    }
  }
  EXPECT_GT(lucky, 0);
}

TEST(Search, NoWitnessesAtSmallN) {
  const std::vector<int> ns{8};
  EXPECT_TRUE(precision_failure_search(ns, PrecisionConfig::hardware(), PrecisionConfig::bigfloat(256)).empty());
}

TEST(Search, IdenticalPrecisionsNeverDisagree) {
  const std::vector<int> ns{4, 20, 40};
  const auto cfg = PrecisionConfig::bigfloat(160);
  EXPECT_TRUE(precision_failure_search(ns, cfg, cfg).empty());
  const auto hw = PrecisionConfig::hardware();
  EXPECT_TRUE(precision_failure_search(ns, hw, [&](int) { return hw; }).empty());
}

TEST(Search, LargeNHasWitnesses) {
  const std::vector<int> ns{48};
  const auto found = precision_failure_search(ns, PrecisionConfig::hardware(), PrecisionConfig::bigfloat(192));
  ASSERT_FALSE(found.empty());
  for (const auto& w : found) {
    EXPECT_EQ(w.n, 48);
    EXPECT_NE(w.verdict_low, w.verdict_high);
    EXPECT_EQ(w.verdict_high, tasks::pal_eval(w.word));
    EXPECT_EQ(w.bits_low, 53);
  }
  const auto csv = witnesses_csv(found);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "n,mantissa_bits_low,witness_word,s_low,s_high,verdict_low,verdict_high");
}

TEST(Search, FixedHighNeedsFourNBits) {
  const std::vector<int> ns{40};
  EXPECT_THROW(precision_failure_search(ns, PrecisionConfig::hardware(), PrecisionConfig::bigfloat(100)),
               std::invalid_argument);
}

TEST(Search, DirectedCandidatesIncludeInnermostFlip) {
  const auto words = directed_candidates(10, 3);
  Word flipped(10, 0);
  flipped[4] = 1;
  bool found = false;
  for (const auto& w : words) found = found || (w == flipped);
  EXPECT_TRUE(found);
}
