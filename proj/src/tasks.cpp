#include "onelayer/tasks.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace onelayer::tasks {

std::string task_name(Task t) {
  switch (t) {
    case Task::kComp: return "comp";
    case Task::kSum2: return "sum2";
    case Task::kPal: return "pal";
  }
  return "?";
}

Task parse_task(const std::string& name) {
  if (name == "comp") return Task::kComp;
  if (name == "sum2") return Task::kSum2;
  if (name == "pal") return Task::kPal;
  throw std::invalid_argument("unknown task '" + name + "'");
}

std::vector<Symbol> alphabet(Task t, int n, int m) {
  std::vector<Symbol> out;
  switch (t) {
    case Task::kComp:
      for (int s = 1; s <= n; ++s) out.push_back(s);
      break;
    case Task::kSum2:
      for (int s = -m; s <= m; ++s) out.push_back(s);
      break;
    case Task::kPal:
      out = {0, 1};
      break;
  }
  return out;
}

void TaskInstance::validate() const {
  if (n < 1 || word.size() != static_cast<std::size_t>(n)) {
    throw InputError("task instance word length must equal n");
  }
  if (task == Task::kSum2 && m < 0) throw InputError("sum2 needs m >= 0");
  const auto sigma = alphabet(task, n, m);
  for (Symbol s : word) {
    if (std::find(sigma.begin(), sigma.end(), s) == sigma.end()) {
      throw InputError("symbol " + std::to_string(s) + " outside the " + task_name(task) + " alphabet");
    }
  }
}

bool TaskInstance::evaluate() const {
  validate();
  switch (task) {
    case Task::kComp: return comp_eval(word);
    case Task::kSum2: return sum2_eval(word, m);
    case Task::kPal: return pal_eval(word);
  }
  return false;
}

nlohmann::json to_json(const TaskInstance& inst) {
  return {{"task", task_name(inst.task)}, {"n", inst.n}, {"m", inst.m}, {"word", inst.word}};
}

TaskInstance instance_from_json(const nlohmann::json& j) {
  TaskInstance inst;
  inst.task = parse_task(j.at("task").get<std::string>());
  inst.n = j.at("n").get<int>();
  inst.m = j.value("m", 0);
  inst.word = j.at("word").get<Word>();
  inst.validate();
  return inst;
}

bool comp_eval(std::span<const Symbol> word) {
  const auto n = static_cast<int>(word.size());
  if (n < 1) throw InputError("comp needs a nonempty word");
  for (Symbol s : word) {
    if (s < 1 || s > n) throw InputError("comp symbol " + std::to_string(s) + " outside {1..n}");
  }
  return word[static_cast<std::size_t>(word[0] - 1)] == 1;
}

bool sum2_eval(std::span<const Symbol> word, int m) {
  std::unordered_set<Symbol> seen;
  for (Symbol s : word) {
    if (s < -m || s > m) throw InputError("sum2 symbol " + std::to_string(s) + " outside {-m..m}");
    seen.insert(s);
  }
  return std::any_of(seen.begin(), seen.end(), [&](Symbol s) { return seen.count(-s) > 0; });
}

bool pal_eval(std::span<const Symbol> word) {
  return std::equal(word.begin(), word.begin() + static_cast<std::ptrdiff_t>(word.size() / 2),
                    word.rbegin());
}

Word comp_special_word(int n, int a1, std::span<const Symbol> b) {
  if (n < 2) throw std::invalid_argument("comp special inputs need n >= 2");
  if (a1 < 2 || a1 > n) throw std::invalid_argument("a1 must lie in {2..n}");
  if (b.size() != static_cast<std::size_t>(n - 1)) {
    throw std::invalid_argument("b must have n - 1 entries");
  }
  Word w{a1};
  for (Symbol s : b) {
    if (s != 1 && s != 2) throw std::invalid_argument("b entries must be 1 or 2");
    w.push_back(s);
  }
  return w;
}

Word sum2_encode(int k, std::span<const int> alpha, std::span<const int> beta) {
  if (k < 1) throw std::invalid_argument("sum2_encode needs k >= 1");
  if (alpha.size() != static_cast<std::size_t>(k) || beta.size() != static_cast<std::size_t>(k)) {
    throw std::invalid_argument("alpha and beta must have k entries");
  }
  Word w;
  w.reserve(static_cast<std::size_t>(2 * k));
  for (int i = 1; i <= k; ++i) w.push_back(alpha[static_cast<std::size_t>(i - 1)] ? 2 * i : 1);
  for (int i = 1; i <= k; ++i) w.push_back(beta[static_cast<std::size_t>(i - 1)] ? -2 * i : 1);
  return w;
}

Bits bits_of(std::uint64_t index, int k) {
  Bits out(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) out[static_cast<std::size_t>(k - 1 - j)] = static_cast<int>((index >> j) & 1U);
  return out;
}

std::vector<Word> comp_special_family(int n) {
  std::vector<Word> out;
  const std::uint64_t rows = std::uint64_t{1} << (n - 1);
  for (int a1 = 2; a1 <= n; ++a1) {
    for (std::uint64_t r = 0; r < rows; ++r) {
      Word b;
      for (int bit : bits_of(r, n - 1)) b.push_back(bit ? 1 : 2);
      out.push_back(comp_special_word(n, a1, b));
    }
  }
  return out;
}

std::vector<Word> sum2_special_family(int k) {
  std::vector<Word> out;
  const std::uint64_t count = std::uint64_t{1} << k;
  for (std::uint64_t a = 0; a < count; ++a) {
    const auto alpha = bits_of(a, k);
    for (std::uint64_t b = 0; b < count; ++b) out.push_back(sum2_encode(k, alpha, bits_of(b, k)));
  }
  return out;
}

}  // namespace onelayer::tasks
