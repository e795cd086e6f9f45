#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "onelayer/construction.hpp"
#include "onelayer/io.hpp"
#include "onelayer/model.hpp"
#include "onelayer/tasks.hpp"
#include "support/fixtures.hpp"

using namespace onelayer;
using namespace onelayer::model;
using numerics::Matrix;
using numerics::PrecisionConfig;
using numerics::Scalar;
using numerics::Vector;

namespace {

const PrecisionConfig kHw = PrecisionConfig::hardware();

Scalar S(double v, const PrecisionConfig& cfg = kHw) { return Scalar::from_double(v, cfg); }

Vector vec(std::initializer_list<double> xs, const PrecisionConfig& cfg = kHw) {
  Vector v;
  for (double x : xs) v.push_back(S(x, cfg));
  return v;
}

MlpSpec identity_mlp(const PrecisionConfig& cfg = kHw) {
  MlpLayer out{Matrix::zeros(1, 1, cfg), numerics::zeros(1, cfg)};
  out.weight.at(0, 0) = Scalar::one(cfg);
  return MlpSpec{{out}};
}

Word random_word(const TransformerSpec& spec, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, spec.sigma.size() - 1);
  Word w(static_cast<std::size_t>(spec.n));
  for (auto& s : w) s = spec.sigma[pick(rng)];
  return w;
}

}  // namespace

TEST(Embed, ConstantEncodingGivesCopies) {
  auto spec = fixtures::blank_spec(4, {0, 1}, 2, kHw);
  for (auto& row : spec.pos_encoding) row = vec({0.5, -2});
  spec.mlp = constant_mlp(2, 1.0, kHw);
  const auto fs = embed(spec, Word{0, 1, 1, 0});
  ASSERT_EQ(fs.size(), 4u);
  for (const auto& f : fs) {
    EXPECT_EQ(f[0].to_double(), 0.5);
    EXPECT_EQ(f[1].to_double(), -2.0);
  }
}

TEST(Embed, SingleTokenAndTableLookup) {
  auto one = fixtures::blank_spec(1, {7, 8}, 1, kHw);
  one.encoding(1, 8) = vec({3});
  EXPECT_EQ(embed(one, Word{8})[0][0].to_double(), 3.0);

  auto two = fixtures::blank_spec(2, {0, 1}, 2, kHw);
  two.encoding(1, 1) = vec({1, 2});
  two.encoding(2, 0) = vec({3, 4});
  two.encoding(2, 1) = vec({5, 6});
  const auto fs = embed(two, Word{1, 0});
  EXPECT_EQ(fs[0][0].to_double(), 1.0);
  EXPECT_EQ(fs[0][1].to_double(), 2.0);
  EXPECT_EQ(fs[1][0].to_double(), 3.0);
  EXPECT_EQ(fs[1][1].to_double(), 4.0);
}

TEST(Embed, RejectsBadWords) {
  auto spec = fixtures::blank_spec(3, {0, 1}, 1, kHw);
  spec.mlp = identity_mlp();
  EXPECT_THROW(embed(spec, Word{0, 1}), InputError);
  EXPECT_THROW(embed(spec, Word{0, 1, 2}), InputError);
  EXPECT_THROW(forward(spec, Word{0, 1, 0, 1}), InputError);
}

TEST(AttentionScores, ZeroKeyOrZeroQuery) {
  const auto spec = random_spec(3, {0, 1}, 3, std::vector<int>{2}, 4, kHw);
  auto zero_k = spec;
  zero_k.K = Matrix::zeros(3, 3, kHw);
  auto zero_q = spec;
  zero_q.h = numerics::zeros(3, kHw);
  const Word w{1, 0, 1};
  for (const auto* s : {&zero_k, &zero_q}) {
    for (const auto& x : attention_scores(*s, embed(*s, w))) EXPECT_TRUE(x.is_zero());
  }
}

TEST(AttentionScores, HandArithmetic) {
  auto spec = fixtures::blank_spec(1, {0}, 1, kHw);
  spec.K.at(0, 0) = S(2);
  spec.Q.at(0, 0) = S(1);
  spec.h = vec({3});
  spec.encoding(1, 0) = vec({5});
  EXPECT_EQ(attention_scores(spec, embed(spec, Word{0}))[0].to_double(), 30.0);
}

TEST(Pooled, UniformScoresGiveMean) {
  auto spec = fixtures::blank_spec(3, {0, 1}, 1, kHw);
  spec.encoding(1, 1) = vec({3});
  spec.encoding(2, 1) = vec({6});
  spec.encoding(3, 0) = vec({-3});
  EXPECT_EQ(pooled(spec, Word{1, 1, 0})[0].to_double(), 2.0);
  auto single = fixtures::blank_spec(1, {0}, 2, kHw);
  single.encoding(1, 0) = vec({1.25, -7});
  const auto p = pooled(single, Word{0});
  EXPECT_EQ(p[0].to_double(), 1.25);
  EXPECT_EQ(p[1].to_double(), -7.0);
}

TEST(Pooled, HandSoftmax) {
  for (const auto& cfg : {kHw, PrecisionConfig::bigfloat(128)}) {
    const auto spec = fixtures::blank_spec(2, {0}, 2, cfg);
    const std::vector<Vector> tokens{vec({1, 0}, cfg), vec({0, 1}, cfg)};
    const Vector scores{log(Scalar::from_int(2, cfg)), Scalar::zero(cfg)};
    const auto h = pool(spec, tokens, scores);
    const auto three = Scalar::from_int(3, cfg);
    EXPECT_LE(numerics::ulp_distance(h[0], Scalar::from_int(2, cfg) / three), 4.0);
    EXPECT_LE(numerics::ulp_distance(h[1], Scalar::one(cfg) / three), 4.0);
  }
}

TEST(MlpEval, IdentityAndDeadRelu) {
  EXPECT_EQ(mlp_eval(identity_mlp(), vec({-4.5})).to_double(), -4.5);

  MlpLayer hidden{Matrix::zeros(1, 1, kHw), numerics::zeros(1, kHw)};
  hidden.weight.at(0, 0) = S(1);
  MlpLayer out{Matrix::zeros(1, 1, kHw), vec({0.25})};
  out.weight.at(0, 0) = S(10);
  const MlpSpec relu{{hidden, out}};
  EXPECT_EQ(mlp_eval(relu, vec({-1})).to_double(), 0.25);
  EXPECT_EQ(mlp_eval(relu, vec({2})).to_double(), 20.25);
  EXPECT_EQ(relu.neuron_count(), 1u);
}

TEST(MlpEval, ZeroTestNet) {
  const auto cfg = PrecisionConfig::bigfloat(128);
  const auto net = construction::zero_test_mlp(2, S(0.01, cfg), cfg);
  const auto v = mlp_eval(net, vec({0.05, 0}, cfg));
  EXPECT_LE(std::abs(v.to_double() + 0.04), 1e-30);
  EXPECT_EQ(net.neuron_count(), 2u);
}

TEST(MlpEval, DimensionMismatch) {
  EXPECT_THROW(mlp_eval(identity_mlp(), vec({1, 2})), SpecError);
  MlpLayer a{Matrix::zeros(2, 3, kHw), numerics::zeros(2, kHw)};
  MlpLayer b{Matrix::zeros(1, 3, kHw), numerics::zeros(1, kHw)};
  EXPECT_THROW((MlpSpec{{a, b}}.validate()), SpecError);
  EXPECT_THROW((MlpSpec{}.validate()), SpecError);
}

TEST(Forward, ConstantMlps) {
  auto spec = random_spec(4, {0, 1}, 3, std::vector<int>{3}, 9, kHw);
  spec.mlp = constant_mlp(3, 1.0, kHw);
  auto zero = spec;
  zero.mlp = constant_mlp(3, 0.0, kHw);
  for (std::uint64_t i = 0; i < 16; ++i) {
    const auto w = tasks::bits_of(i, 4);
    EXPECT_TRUE(forward(spec, w));
    EXPECT_FALSE(forward(zero, w));
  }
}

TEST(Forward, PalindromeSpec) {
  const auto pal = construction::build_palindrome_transformer(4, PrecisionConfig::bigfloat(64));
  EXPECT_TRUE(forward(pal.transformer, Word{0, 1, 1, 0}));
  EXPECT_FALSE(forward(pal.transformer, Word{0, 1, 0, 0}));
}

TEST(Forward, NanDecisionIsAnError) {
  EXPECT_THROW(decide(S(NAN)), NumericError);
  EXPECT_FALSE(decide(S(0.0)));
  EXPECT_FALSE(decide(S(-0.0)));
  EXPECT_TRUE(decide(S(1e-300)));
}

TEST(Forward, TraceMatchesPieces) {
  const auto spec = random_spec(5, {0, 1, 2}, 3, std::vector<int>{4, 2}, 21, kHw);
  const Word w{2, 0, 1, 1, 2};
  const auto t = trace_forward(spec, w);
  EXPECT_EQ(t.tokens.size(), 5u);
  EXPECT_EQ(t.decision, forward(spec, w));
  const auto p = pooled(spec, w);
  for (int i = 0; i < 3; ++i) EXPECT_TRUE(p[i] == t.pooled[i]);
}

TEST(ModelProperty, ShiftInvariance) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> shift(-30, 30);
  for (const auto& cfg : {kHw, PrecisionConfig::bigfloat(128, true), PrecisionConfig::bigfloat(128)}) {
    for (int trial = 0; trial < 60; ++trial) {
      const auto spec = random_spec(6, {0, 1, 2}, 4, std::vector<int>{5}, 100 + trial, cfg);
      const auto w = random_word(spec, rng);
      const auto tokens = embed(spec, w);
      // Scores rounded to a 2^-20 grid so that adding an integer is exact.
      Vector scores;
      for (const auto& s : attention_scores(spec, tokens)) {
        scores.push_back(Scalar::from_double(std::ldexp(std::round(std::ldexp(s.to_double(), 20)), -20), cfg));
      }
      const auto c = Scalar::from_double(std::round(shift(rng)), cfg);
      Vector shifted;
      for (const auto& s : scores) shifted.push_back(s + c);
      const auto a = pool(spec, tokens, scores);
      const auto b = pool(spec, tokens, shifted);
      // Without the max shift, coordinates that cancel are judged against
      // the ulp of sum_j w_j |f_j|.
      const auto wide = PrecisionConfig::bigfloat(256, true);
      Vector wide_scores;
      for (const auto& s : scores) wide_scores.push_back(s.convert(wide));
      const auto weights = numerics::softmax_weights(wide_scores, wide);
      Vector za, zb;
      for (int i = 0; i < spec.d; ++i) {
        if (cfg.stable_softmax) {
          EXPECT_LE(numerics::ulp_distance(a[i], b[i]), 8.0);
        } else {
          auto scale = Scalar::zero(cfg);
          for (std::size_t j = 0; j < tokens.size(); ++j) scale += weights[j].convert(cfg) * abs(tokens[j][i]);
          EXPECT_LE(abs(a[i] - b[i]), scale.ulp() * Scalar::from_int(8, cfg));
        }
        za.push_back(spec.h[i] + a[i]);
        zb.push_back(spec.h[i] + b[i]);
      }
      const auto na = mlp_eval(spec.mlp, za);
      if (std::abs(na.to_double()) > 1e-9) EXPECT_EQ(decide(na), decide(mlp_eval(spec.mlp, zb)));
    }
  }
}

TEST(ModelProperty, PermutationEquivariance) {
  std::mt19937_64 rng(32);
  for (const auto& cfg : {kHw, PrecisionConfig::bigfloat(96)}) {
    for (int trial = 0; trial < 60; ++trial) {
      const int n = 2 + trial % 6;
      const auto spec = random_spec(n, {0, 1, 2}, 3, std::vector<int>{4}, 200 + trial, cfg);
      std::vector<int> perm(static_cast<std::size_t>(n));
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      auto moved = spec;
      for (int i = 0; i < n; ++i) {
        for (auto s : spec.sigma) moved.encoding(perm[i] + 1, s) = spec.encoding(i + 1, s);
      }
      for (int r = 0; r < 10; ++r) {
        const auto w = random_word(spec, rng);
        Word pw(w.size());
        for (int i = 0; i < n; ++i) pw[perm[i]] = w[i];
        EXPECT_EQ(forward(spec, w), forward(moved, pw));
      }
    }
  }
}

TEST(ModelProperty, PrecisionRefinement) {
  std::mt19937_64 rng(33);
  for (int P : {12, 20, 32}) {
    const auto lo = PrecisionConfig::bigfloat(2 * P);
    const auto hi = PrecisionConfig::bigfloat(4 * P);
    int checked = 0;
    for (int trial = 0; trial < 40; ++trial) {
      const auto base = random_spec(5, {0, 1}, 3, std::vector<int>{3}, 300 + trial, hi);
      const auto spec_lo = with_precision(base, lo);
      for (int r = 0; r < 8; ++r) {
        const auto w = random_word(base, rng);
        const auto t = trace_forward(base, w);
        if (abs(t.output) > Scalar::from_double(std::ldexp(1.0, 8 - 2 * P), hi)) {
          ++checked;
          EXPECT_EQ(forward(spec_lo, w), t.decision);
        }
      }
    }
    EXPECT_GT(checked, 200);
  }
}

TEST(SpecJson, RoundTripIsLossless) {
  for (const auto& cfg : {kHw, PrecisionConfig::bigfloat(200)}) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto spec = random_spec(3 + static_cast<int>(seed % 4), {-1, 0, 1}, 2 + static_cast<int>(seed % 3),
                                    std::vector<int>{3, 2}, seed, cfg);
      const auto text = io::to_json(spec).dump();
      const auto back = io::spec_from_json(nlohmann::json::parse(text), cfg);
      EXPECT_EQ(io::to_json(back).dump(), text);
      ASSERT_EQ(back.pos_encoding.size(), spec.pos_encoding.size());
      for (std::size_t r = 0; r < spec.pos_encoding.size(); ++r) {
        for (int i = 0; i < spec.d; ++i) EXPECT_TRUE(back.pos_encoding[r][i] == spec.pos_encoding[r][i]);
      }
    }
  }
}

TEST(SpecJson, MalformedSpecsAreRejected) {
  const auto good = io::to_json(random_spec(3, {0, 1}, 2, std::vector<int>{2}, 1, kHw));
  auto missing = good;
  missing.erase("K");
  EXPECT_THROW(io::spec_from_json(missing, kHw), SpecError);
  auto short_table = good;
  short_table["pos_encoding"].erase(0);
  EXPECT_THROW(io::spec_from_json(short_table, kHw), SpecError);
  auto bad_number = good;
  bad_number["h"][0] = "one";
  EXPECT_THROW(io::spec_from_json(bad_number, kHw), SpecError);
  EXPECT_THROW(io::word_from_json(nlohmann::json::parse(R"([1, "x"])")), InputError);
}
