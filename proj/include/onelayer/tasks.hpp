#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "onelayer/model.hpp"

namespace onelayer::tasks {

using model::Symbol;
using model::Word;
using Bits = std::vector<int>;

enum class Task { kComp, kSum2, kPal };

std::string task_name(Task t);
Task parse_task(const std::string& name);

/// comp: {1..n}; sum2: {-m..m}; pal: {0, 1}.
std::vector<Symbol> alphabet(Task t, int n, int m = 0);

struct TaskInstance {
  Task task = Task::kPal;
  int n = 0;
  int m = 0;  // sum2 only
  Word word;

  void validate() const;
  /// Ground-truth label.
  bool evaluate() const;
};

nlohmann::json to_json(const TaskInstance& inst);
TaskInstance instance_from_json(const nlohmann::json& j);

/// 1 iff a_{a_1} = 1, i.e. phi(phi(1)) = 1 with phi(i) = a_i (1-based).
bool comp_eval(std::span<const Symbol> word);

/// 1 iff some a_i + a_j = 0; i = j is allowed, so any 0 entry counts.
bool sum2_eval(std::span<const Symbol> word, int m);

bool pal_eval(std::span<const Symbol> word);

/// (a1, b_2, ..., b_n) with a1 in {2..n} and b in {1,2}^{n-1}; `b` holds
/// b_2..b_n in order.
Word comp_special_word(int n, int a1, std::span<const Symbol> b);

/// a_i = 2i if alpha_i else 1; b_i = -2i if beta_i else 1; word a_1..a_k b_1..b_k.
Word sum2_encode(int k, std::span<const int> alpha, std::span<const int> beta);

/// The i-th k-bit vector in lexicographic order, most significant first
/// (bit j of `index` becomes entry k-1-j).
Bits bits_of(std::uint64_t index, int k);

/// Every special input of the comp reduction family for length n.
std::vector<Word> comp_special_family(int n);
/// Every sum2_encode(k, alpha, beta) word, alpha-major.
std::vector<Word> sum2_special_family(int k);

}  // namespace onelayer::tasks
