#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "onelayer/model.hpp"
#include "onelayer/shattering.hpp"
#include "onelayer/tasks.hpp"

namespace onelayer::experiments {

using model::TransformerSpec;
using model::Word;

/// Labeled special inputs of one task family.
struct Dataset {
  tasks::Task task = tasks::Task::kComp;
  int n = 0;
  std::vector<model::Symbol> sigma;
  std::vector<Word> words;
  std::vector<int> labels;
  bool sampled = false;

  /// Fraction of the majority label.
  double max_class_frequency() const;
};

/// All special inputs for n <= 10, otherwise `sample_size` seeded draws.
Dataset make_dataset(tasks::Task task, int n, int sample_size = 2048, std::uint64_t seed = 1);

struct MlpShape {
  std::vector<int> hidden;
  /// Output weights frozen at zero; only the output bias trains.
  bool constant = false;

  int neurons() const;
  std::string label() const;
};

struct TrainConfig {
  tasks::Task task = tasks::Task::kComp;
  int n = 4;
  int d = 2;
  MlpShape mlp{{4}, false};
  double learning_rate = 0.1;
  int steps = 200;
  std::uint64_t seed = 1;
  int sample_size = 2048;
};

struct TrainResult {
  TransformerSpec spec;
  double accuracy = 0.0;
  double initial_accuracy = 0.0;
  int best_step = 0;
  double final_loss = 0.0;
  bool diverged = false;
  std::string error;
};

/// Seeded initialization: every weight uniform in [-1/sqrt(d), 1/sqrt(d)].
TransformerSpec initial_spec(const TrainConfig& cfg, const std::vector<model::Symbol>& sigma);

/// Full-batch gradient descent on the logistic loss of N(h + h-hat) with
/// analytic gradients, always in hardware doubles. Returns the best
/// train-accuracy checkpoint.
TrainResult train(const TrainConfig& cfg);
TrainResult train(const TrainConfig& cfg, const Dataset& data);

/// Flat parameter order: pos_encoding rows, h, K, Q, then each MLP layer's
/// weights followed by its bias.
std::vector<double> flatten(const TransformerSpec& spec);
/// Copies `params` into a spec shaped like `shape`, rounded into `cfg`.
TransformerSpec unflatten(const TransformerSpec& shape, std::span<const double> params,
                          const numerics::PrecisionConfig& cfg);

struct LossGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // same order as flatten()
  double accuracy = 0.0;
};

/// Mean logistic loss log(1 + exp(-y N)) with y = +-1 and its analytic gradient.
LossGradient loss_and_gradient(const TransformerSpec& spec, const Dataset& data);

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRow {
  tasks::Task task = tasks::Task::kComp;
  int n = 0;
  int d = 0;
  std::string mlp;
  int mlp_neurons = 0;
  double train_accuracy = 0.0;
  double initial_accuracy = 0.0;
  int best_step = 0;
  double final_loss = 0.0;
  shattering::VcBound bound;          // per-coordinate division rule
  shattering::VcBound bound_div_one;  // single-division rule
  int points_count = 0;
  std::string status = "ok";
};

struct SweepResult {
  std::vector<SweepRow> rows;

  std::string to_csv() const;
};

struct SweepConfig {
  tasks::Task task = tasks::Task::kComp;
  int n = 4;
  std::vector<int> d_list;
  std::vector<MlpShape> mlp_list;
  double learning_rate = 0.1;
  int steps = 200;
  std::uint64_t seed = 1;
  int sample_size = 2048;
};

SweepConfig sweep_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SweepConfig& cfg);

/// One row per (d, mlp) in d-major order; rows train in parallel and failures
/// are recorded in the row's status.
SweepResult dimension_sweep(const SweepConfig& cfg);

// ---------------------------------------------------------------------------
// Shatter audits

struct AuditReport {
  tasks::Task task = tasks::Task::kComp;
  int n = 0;
  int points = 0;
  std::uint64_t labelings_checked = 0;
  bool sampled = false;
  /// Distinct labelings realized exactly, computed through hyp_eval.
  std::uint64_t realized_count = 0;
  /// Same count computed through forward() on the corresponding words.
  std::uint64_t forward_realized_count = 0;
  /// Table entries where hyp_eval and forward() disagree.
  std::uint64_t mismatches = 0;
  shattering::VcBound bound;

  nlohmann::json to_json() const;
};

struct AuditOptions {
  int sample_size = 10000;
  std::uint64_t seed = 1;
  int exhaustive_max_n = 12;
};

AuditReport shatter_audit(const TransformerSpec& spec, tasks::Task task, int n,
                          const AuditOptions& options = {});

}  // namespace onelayer::experiments
