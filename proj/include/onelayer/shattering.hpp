#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "onelayer/model.hpp"
#include "onelayer/tasks.hpp"

namespace onelayer::shattering {

using model::TransformerSpec;
using model::Word;
using numerics::Scalar;
using numerics::Vector;
using tasks::Bits;

/// The softmax numerator/denominator split at `prefix_len`:
///   xbar = sum_{i <= L} e^{s_i} f_i,  p = sum_{i <= L} e^{s_i},
///   ybar, q likewise over i > L.
/// Raw exponentials are used (no max shift) so that the prefix part depends
/// on the prefix symbols only.
struct Decomposition {
  Vector xbar;
  Scalar p;
  Vector ybar;
  Scalar q;
  int prefix_len = 0;
};

struct HypothesisPoint {
  Vector xbar;
  Scalar p;
};

struct HypothesisParams {
  Vector ybar;
  Scalar q;
};

Decomposition decompose(const TransformerSpec& spec, std::span<const model::Symbol> word,
                        int prefix_len);

/// h_{ybar,q}(xbar, p) = [N(h + (xbar + ybar) / (p + q)) > 0].
bool hyp_eval(const TransformerSpec& spec, const HypothesisPoint& point,
              const HypothesisParams& params);

// comp family: points from prefix token a_1 = i + 1, params
// from the suffix b_2..b_n.
std::vector<HypothesisPoint> comp_point_set(const TransformerSpec& spec, int n);
HypothesisParams comp_params_for(const TransformerSpec& spec, std::span<const int> delta);
/// b_{i+1} = 1 if delta_i else 2.
Word comp_suffix_for(std::span<const int> delta);

// sum2 family: points from alpha = e_i, params from beta.
std::vector<HypothesisPoint> sum2_point_set(const TransformerSpec& spec, int k);
HypothesisParams sum2_params_for(const TransformerSpec& spec, std::span<const int> beta);

/// Words whose forward() value the hypothesis (point i, params for labeling)
/// reproduces.
Word comp_word_for(int n, int point_index, std::span<const int> delta);
Word sum2_word_for(int k, int point_index, std::span<const int> beta);

struct ShatterTable {
  std::vector<HypothesisPoint> points;
  std::vector<Bits> labelings;
  /// realized[r][i] = hyp_eval(points[i], param_gen(labelings[r])).
  std::vector<Bits> realized;

  bool row_matches(std::size_t r) const { return realized[r] == labelings[r]; }
  /// Number of labelings whose realized row equals the labeling.
  std::size_t realized_count() const;
  /// Every one of the 2^|points| labelings is present and realized.
  bool shattered() const;

  /// Columns: labeling, realized, match.
  std::string to_csv() const;
  nlohmann::json summary() const;
};

/// All 2^m labelings in lexicographic order.
std::vector<Bits> all_labelings(int m);

using ParamGenerator = std::function<HypothesisParams(const Bits&)>;

ShatterTable shatter_table(const TransformerSpec& spec, std::vector<HypothesisPoint> points,
                           std::vector<Bits> labelings, const ParamGenerator& param_gen);

/// Row bitmasks: bit i of row c is hyp_eval(points[i], candidates[c]).
std::vector<std::uint32_t> hypothesis_rows(const TransformerSpec& spec,
                                           std::span<const HypothesisPoint> points,
                                           std::span<const HypothesisParams> candidates);

/// Size of the largest subset of the `num_points` columns on which `rows`
/// realize every labeling. Level-wise search: a set is only tested once all
/// of its one-smaller subsets are known to be shattered.
int max_shattered_subset(std::span<const std::uint32_t> rows, int num_points);

int max_shattered_subset(const TransformerSpec& spec, std::span<const HypothesisPoint> points,
                         std::span<const HypothesisParams> candidates);

enum class ParamDomain {
  /// (ybar, q) produced by actual suffixes of special inputs.
  kRealizable,
  /// Random (ybar, q) in R^{d+1} with p + q > 0 for every point.
  kUnrestricted,
};

std::vector<HypothesisParams> candidate_params(const TransformerSpec& spec, tasks::Task task,
                                               std::span<const HypothesisPoint> points,
                                               ParamDomain domain, int count,
                                               std::uint64_t seed);

// ---------------------------------------------------------------------------
// Operation counting and the VC upper bound.

enum class DivisionRule {
  kOne,            // a single division by p + q
  kPerCoordinate,  // d divisions, one per coordinate
};

struct CountingRules {
  DivisionRule division = DivisionRule::kPerCoordinate;
};

struct OpCount {
  std::uint64_t W = 0;  // parameters: d + 1
  std::uint64_t t = 0;  // total operations
  std::uint64_t additions = 0;
  std::uint64_t multiplications = 0;
  std::uint64_t divisions = 0;
  std::uint64_t comparisons = 0;
};

OpCount count_ops(int d, const model::MlpSpec& mlp, const CountingRules& rules = {});
/// Same count for an MLP given only by its layer widths d -> hidden... -> 1.
OpCount count_ops(int d, std::span<const int> hidden, const CountingRules& rules = {});

/// bound = ceil(coefficient * W^w_exponent * (t + t_offset)^t_exponent).
/// The defaults give 4 W (t + 2), the algorithmic-complexity VC bound for
/// classes computed by t arithmetic operations and sign tests on W real
/// parameters.
struct BoundFormula {
  double coefficient = 4.0;
  double w_exponent = 1.0;
  double t_offset = 2.0;
  double t_exponent = 1.0;
};

struct VcBound {
  std::uint64_t W = 0;
  std::uint64_t t = 0;
  std::uint64_t bound = 0;
};

VcBound vc_upper_bound(const OpCount& oc, const BoundFormula& formula = {});

std::string division_rule_name(DivisionRule rule);

}  // namespace onelayer::shattering
