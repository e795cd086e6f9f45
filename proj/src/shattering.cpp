#include "onelayer/shattering.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "onelayer/parallel.hpp"

namespace onelayer::shattering {

using numerics::PrecisionConfig;

Decomposition decompose(const TransformerSpec& spec, std::span<const model::Symbol> word,
                        int prefix_len) {
  if (prefix_len < 1 || prefix_len >= spec.n) {
    throw std::invalid_argument("prefix_len must lie in [1, n)");
  }
  const auto& cfg = spec.precision;
  const auto tokens = model::embed(spec, word);
  const auto q_vec = model::query(spec);
  Decomposition out{numerics::zeros(static_cast<std::size_t>(spec.d), cfg), Scalar::zero(cfg),
                    numerics::zeros(static_cast<std::size_t>(spec.d), cfg), Scalar::zero(cfg),
                    prefix_len};
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Scalar e = numerics::exp(model::attention_score(spec, tokens[i], q_vec));
    if (e.is_inf()) throw NumericError("decomposition exponential overflowed");
    const bool prefix = static_cast<int>(i) < prefix_len;
    Vector& acc = prefix ? out.xbar : out.ybar;
    for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += e * tokens[i][c];
    (prefix ? out.p : out.q) += e;
  }
  return out;
}

bool hyp_eval(const TransformerSpec& spec, const HypothesisPoint& point,
              const HypothesisParams& params) {
  const Scalar denominator = point.p + params.q;
  if (!(denominator.sign() > 0)) throw std::invalid_argument("hypothesis needs p + q > 0");
  if (point.xbar.size() != spec.h.size() || params.ybar.size() != spec.h.size()) {
    throw std::invalid_argument("hypothesis point/params have the wrong dimension");
  }
  Vector z = spec.h;
  for (std::size_t c = 0; c < z.size(); ++c) {
    z[c] += (point.xbar[c] + params.ybar[c]) / denominator;
  }
  return model::decide(model::mlp_eval(spec.mlp, z));
}

namespace {

void require_alphabet(const TransformerSpec& spec, tasks::Task task, int n) {
  auto expected = tasks::alphabet(task, n, n);
  auto actual = spec.sigma;
  std::sort(actual.begin(), actual.end());
  if (spec.n != n || actual != expected) {
    throw InputError("spec alphabet/length does not match the " + tasks::task_name(task) +
                     " task at n = " + std::to_string(n));
  }
}

int sum2_k(const TransformerSpec& spec) {
  if (spec.n % 2 != 0) throw std::invalid_argument("sum2 families need even n");
  return spec.n / 2;
}

Bits unit_vector(int k, int index) {
  Bits e(static_cast<std::size_t>(k), 0);
  e[static_cast<std::size_t>(index)] = 1;
  return e;
}

}  // namespace

Word comp_suffix_for(std::span<const int> delta) {
  Word b;
  b.reserve(delta.size());
  for (int bit : delta) b.push_back(bit ? 1 : 2);
  return b;
}

Word comp_word_for(int n, int point_index, std::span<const int> delta) {
  return tasks::comp_special_word(n, point_index + 2, comp_suffix_for(delta));
}

Word sum2_word_for(int k, int point_index, std::span<const int> beta) {
  return tasks::sum2_encode(k, unit_vector(k, point_index), beta);
}

std::vector<HypothesisPoint> comp_point_set(const TransformerSpec& spec, int n) {
  require_alphabet(spec, tasks::Task::kComp, n);
  const Bits filler(static_cast<std::size_t>(n - 1), 0);
  std::vector<HypothesisPoint> points;
  for (int i = 0; i < n - 1; ++i) {
    auto dec = decompose(spec, comp_word_for(n, i, filler), 1);
    points.push_back({std::move(dec.xbar), std::move(dec.p)});
  }
  return points;
}

HypothesisParams comp_params_for(const TransformerSpec& spec, std::span<const int> delta) {
  const int n = spec.n;
  if (delta.size() != static_cast<std::size_t>(n - 1)) {
    throw std::invalid_argument("delta must have n - 1 entries");
  }
  auto dec = decompose(spec, comp_word_for(n, 0, delta), 1);
  return {std::move(dec.ybar), std::move(dec.q)};
}

std::vector<HypothesisPoint> sum2_point_set(const TransformerSpec& spec, int k) {
  if (2 * k != spec.n) throw std::invalid_argument("sum2 point set needs n = 2k");
  require_alphabet(spec, tasks::Task::kSum2, spec.n);
  const Bits zero(static_cast<std::size_t>(k), 0);
  std::vector<HypothesisPoint> points;
  for (int i = 0; i < k; ++i) {
    auto dec = decompose(spec, sum2_word_for(k, i, zero), k);
    points.push_back({std::move(dec.xbar), std::move(dec.p)});
  }
  return points;
}

HypothesisParams sum2_params_for(const TransformerSpec& spec, std::span<const int> beta) {
  const int k = sum2_k(spec);
  if (beta.size() != static_cast<std::size_t>(k)) throw std::invalid_argument("beta must have k entries");
  const Bits zero(static_cast<std::size_t>(k), 0);
  auto dec = decompose(spec, tasks::sum2_encode(k, zero, beta), k);
  return {std::move(dec.ybar), std::move(dec.q)};
}

// ---------------------------------------------------------------------------
// Shatter tables

std::size_t ShatterTable::realized_count() const {
  std::size_t count = 0;
  for (std::size_t r = 0; r < labelings.size(); ++r) count += row_matches(r) ? 1 : 0;
  return count;
}

bool ShatterTable::shattered() const {
  if (points.size() >= 63) return false;
  const std::uint64_t needed = std::uint64_t{1} << points.size();
  std::unordered_set<std::uint64_t> seen;
  for (std::size_t r = 0; r < labelings.size(); ++r) {
    if (!row_matches(r)) continue;
    std::uint64_t key = 0;
    for (int bit : labelings[r]) key = (key << 1) | static_cast<std::uint64_t>(bit);
    seen.insert(key);
  }
  return seen.size() == needed;
}

std::string ShatterTable::to_csv() const {
  std::ostringstream out;
  out << "labeling,realized,match\n";
  for (std::size_t r = 0; r < labelings.size(); ++r) {
    for (int b : labelings[r]) out << b;
    out << ',';
    for (int b : realized[r]) out << b;
    out << ',' << (row_matches(r) ? 1 : 0) << '\n';
  }
  return out.str();
}

nlohmann::json ShatterTable::summary() const {
  return {{"points", points.size()},
          {"labelings", labelings.size()},
          {"realized_count", realized_count()},
          {"shattered", shattered()}};
}

std::vector<Bits> all_labelings(int m) {
  if (m < 0 || m > 30) throw std::invalid_argument("labeling enumeration limited to 30 points");
  std::vector<Bits> out;
  out.reserve(std::size_t{1} << m);
  for (std::uint64_t i = 0; i < (std::uint64_t{1} << m); ++i) out.push_back(tasks::bits_of(i, m));
  return out;
}

ShatterTable shatter_table(const TransformerSpec& spec, std::vector<HypothesisPoint> points,
                           std::vector<Bits> labelings, const ParamGenerator& param_gen) {
  ShatterTable table;
  table.points = std::move(points);
  table.labelings = std::move(labelings);
  table.realized.assign(table.labelings.size(), Bits(table.points.size(), 0));
  parallel_for(table.labelings.size(), [&](std::size_t r) {
    const auto params = param_gen(table.labelings[r]);
    for (std::size_t i = 0; i < table.points.size(); ++i) {
      table.realized[r][i] = hyp_eval(spec, table.points[i], params) ? 1 : 0;
    }
  });
  return table;
}

// ---------------------------------------------------------------------------
// Largest shattered subset

namespace {

/// Gathers the bits of `row` selected by `mask` into the low bits.
std::uint32_t extract_bits(std::uint32_t row, std::uint32_t mask) {
  std::uint32_t out = 0;
  int pos = 0;
  while (mask != 0) {
    const std::uint32_t low = mask & (~mask + 1U);
    if (row & low) out |= 1U << pos;
    ++pos;
    mask ^= low;
  }
  return out;
}

bool shatters(std::span<const std::uint32_t> rows, std::uint32_t subset) {
  const int size = std::popcount(subset);
  const std::size_t patterns = std::size_t{1} << size;
  if (rows.size() < patterns) return false;
  std::vector<bool> seen(patterns, false);
  std::size_t distinct = 0;
  for (auto row : rows) {
    const auto key = extract_bits(row, subset);
    if (!seen[key]) {
      seen[key] = true;
      if (++distinct == patterns) return true;
    }
  }
  return false;
}

}  // namespace

int max_shattered_subset(std::span<const std::uint32_t> rows, int num_points) {
  if (rows.empty()) throw std::invalid_argument("candidate pool is empty");
  if (num_points < 0 || num_points > 20) {
    throw std::invalid_argument("exhaustive subset scan supports at most 20 points");
  }
  std::vector<std::uint32_t> distinct(rows.begin(), rows.end());
  const std::uint32_t all = num_points == 0 ? 0U : (1U << num_points) - 1U;
  for (auto& r : distinct) r &= all;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<std::uint32_t> level{0U};
  int best = 0;
  for (int size = 1; size <= num_points; ++size) {
    if ((std::size_t{1} << size) > distinct.size()) break;
    std::unordered_set<std::uint32_t> previous(level.begin(), level.end());
    std::vector<std::uint32_t> next;
    for (auto base : level) {
      const int start = base == 0 ? 0 : 32 - std::countl_zero(base);
      for (int e = start; e < num_points; ++e) {
        const std::uint32_t candidate = base | (1U << e);
        bool closed = true;
        for (std::uint32_t rest = candidate; rest != 0 && closed; rest &= rest - 1) {
          const std::uint32_t drop = rest & (~rest + 1U);
          closed = previous.count(candidate ^ drop) > 0;
        }
        if (closed && shatters(distinct, candidate)) next.push_back(candidate);
      }
    }
    if (next.empty()) break;
    best = size;
    level = std::move(next);
  }
  return best;
}

std::vector<std::uint32_t> hypothesis_rows(const TransformerSpec& spec,
                                           std::span<const HypothesisPoint> points,
                                           std::span<const HypothesisParams> candidates) {
  if (points.size() > 32) throw std::invalid_argument("row bitmasks hold at most 32 points");
  std::vector<std::uint32_t> rows(candidates.size(), 0U);
  parallel_for(candidates.size(), [&](std::size_t c) {
    std::uint32_t row = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (hyp_eval(spec, points[i], candidates[c])) row |= 1U << i;
    }
    rows[c] = row;
  });
  return rows;
}

int max_shattered_subset(const TransformerSpec& spec, std::span<const HypothesisPoint> points,
                         std::span<const HypothesisParams> candidates) {
  const auto rows = hypothesis_rows(spec, points, candidates);
  return max_shattered_subset(rows, static_cast<int>(points.size()));
}

std::vector<HypothesisParams> candidate_params(const TransformerSpec& spec, tasks::Task task,
                                               std::span<const HypothesisPoint> points,
                                               ParamDomain domain, int count,
                                               std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("candidate pool must be nonempty");
  std::mt19937_64 rng(seed);
  std::vector<HypothesisParams> out;
  const auto& cfg = spec.precision;

  if (domain == ParamDomain::kRealizable) {
    int bits = 0;
    if (task == tasks::Task::kComp) {
      bits = spec.n - 1;
    } else if (task == tasks::Task::kSum2) {
      bits = sum2_k(spec);
    } else {
      throw std::invalid_argument("realizable parameters exist only for comp and sum2");
    }
    auto params_for = [&](const Bits& labeling) {
      return task == tasks::Task::kComp ? comp_params_for(spec, labeling)
                                        : sum2_params_for(spec, labeling);
    };
    const std::uint64_t total = std::uint64_t{1} << bits;
    if (total <= static_cast<std::uint64_t>(count)) {
      for (const auto& labeling : all_labelings(bits)) out.push_back(params_for(labeling));
    } else {
      for (int c = 0; c < count; ++c) out.push_back(params_for(tasks::bits_of(rng() % total, bits)));
    }
    return out;
  }

  // Unrestricted: scale the box from the points so hypotheses are not all
  // trivially saturated.
  if (points.empty()) throw std::invalid_argument("unrestricted parameters need points");
  double min_p = std::numeric_limits<double>::infinity();
  double max_p = 0.0;
  double max_x = 0.0;
  for (const auto& pt : points) {
    const double p = pt.p.to_double();
    min_p = std::min(min_p, p);
    max_p = std::max(max_p, p);
    for (const auto& x : pt.xbar) max_x = std::max(max_x, std::fabs(x.to_double()));
  }
  const double y_range = 4.0 * std::max(max_x, 1.0) * std::max(1.0, static_cast<double>(spec.n));
  std::uniform_real_distribution<double> y_dist(-y_range, y_range);
  std::uniform_real_distribution<double> q_dist(-0.999 * min_p, 4.0 * static_cast<double>(spec.n) * std::max(max_p, 1.0));
  for (int c = 0; c < count; ++c) {
    HypothesisParams params;
    for (int i = 0; i < spec.d; ++i) params.ybar.push_back(Scalar::from_double(y_dist(rng), cfg));
    params.q = Scalar::from_double(q_dist(rng), cfg);
    out.push_back(std::move(params));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Operation counting

OpCount count_ops(int d, std::span<const int> hidden, const CountingRules& rules) {
  if (d < 1) throw std::invalid_argument("operation count needs d >= 1");
  const auto ud = static_cast<std::uint64_t>(d);
  OpCount oc;
  oc.W = ud + 1;
  oc.additions = (ud + 1) + ud;  // xbar + ybar, p + q, then h + quotient
  oc.divisions = rules.division == DivisionRule::kOne ? 1 : ud;
  std::uint64_t in = ud;
  std::uint64_t relus = 0;
  std::vector<int> widths(hidden.begin(), hidden.end());
  widths.push_back(1);
  for (std::size_t l = 0; l < widths.size(); ++l) {
    if (widths[l] < 1) throw std::invalid_argument("MLP widths must be positive");
    const auto out = static_cast<std::uint64_t>(widths[l]);
    oc.multiplications += out * in;
    oc.additions += out * in;  // in - 1 sums plus the bias, per output
    if (l + 1 < widths.size()) relus += out;
    in = out;
  }
  oc.comparisons = relus + 1;
  oc.t = oc.additions + oc.multiplications + oc.divisions + oc.comparisons;
  return oc;
}

OpCount count_ops(int d, const model::MlpSpec& mlp, const CountingRules& rules) {
  mlp.validate();
  if (mlp.input_dim() != static_cast<std::size_t>(d)) {
    throw SpecError("MLP input dimension must equal d");
  }
  std::vector<int> hidden;
  for (std::size_t l = 0; l + 1 < mlp.layers.size(); ++l) {
    hidden.push_back(static_cast<int>(mlp.layers[l].weight.rows));
  }
  return count_ops(d, hidden, rules);
}

VcBound vc_upper_bound(const OpCount& oc, const BoundFormula& formula) {
  const double value = formula.coefficient * std::pow(static_cast<double>(oc.W), formula.w_exponent) *
                       std::pow(static_cast<double>(oc.t) + formula.t_offset, formula.t_exponent);
  std::uint64_t bound = std::numeric_limits<std::uint64_t>::max();
  if (value < 1.8e19) bound = static_cast<std::uint64_t>(std::ceil(value));
  return {oc.W, oc.t, bound};
}

std::string division_rule_name(DivisionRule rule) {
  return rule == DivisionRule::kOne ? "one" : "per-coordinate";
}

}  // namespace onelayer::shattering
