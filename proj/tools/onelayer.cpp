// Command-line front end: forward, pal-demo, shatter, vc-bound, sweep, audit,
// plus pal-spec / random-spec helpers that emit spec files.
//
// Exit codes: 0 success, 2 malformed spec or config, 3 invalid word or
// alphabet mismatch, 4 other runtime failure. With --exit-code, forward exits
// with the decision bit instead of 0.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "onelayer/construction.hpp"
#include "onelayer/experiments.hpp"
#include "onelayer/io.hpp"
#include "onelayer/model.hpp"
#include "onelayer/shattering.hpp"
#include "onelayer/tasks.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace onelayer;

namespace {

constexpr const char* kToolVersion = "onelayer 1.0.0";

enum ExitCode { kOk = 0, kBadSpec = 2, kBadInput = 3, kFailure = 4 };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::string precision = "double";
  std::uint64_t seed = 1;
  std::string out;
  bool trace = false;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// SHA-1 over "blob <size>\0<content>", the same id git assigns the file.
std::string git_blob_hash(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, content.data(), content.size());
  EVP_DigestFinal_ex(ctx, digest, &length);
  EVP_MD_CTX_free(ctx);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + what + ": " + e.what());
  }
}

model::TransformerSpec load_spec(const std::string& path, const numerics::PrecisionConfig& cfg) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const ConfigError& e) {
    throw SpecError(e.what());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SpecError(std::string("spec is not valid JSON: ") + e.what());
  }
  return io::spec_from_json(j, cfg);
}

tasks::Task task_arg(const std::string& name) {
  try {
    return tasks::parse_task(name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void require_task_alphabet(const model::TransformerSpec& spec, tasks::Task task, int n) {
  if (spec.n != n) {
    throw InputError("spec has n = " + std::to_string(spec.n) + ", task needs n = " + std::to_string(n));
  }
  for (model::Symbol s : tasks::alphabet(task, n, n)) {
    if (std::find(spec.sigma.begin(), spec.sigma.end(), s) == spec.sigma.end()) {
      throw InputError("spec alphabet lacks symbol " + std::to_string(s) + " of task " +
                       tasks::task_name(task));
    }
  }
}

model::Word parse_word(const std::string& text) {
  std::string trimmed = text;
  if (!trimmed.empty() && trimmed.front() != '[') trimmed = "[" + trimmed + "]";
  try {
    return io::word_from_json(json::parse(trimmed));
  } catch (const json::exception&) {
    throw InputError("word must be a list of integers, got '" + text + "'");
  }
}

/// Collects output files, writes them atomically under --out and finishes
/// with manifest.json.
class RunWriter {
 public:
  RunWriter(std::string subcommand, const GlobalOptions& global, std::string precision)
      : subcommand_(std::move(subcommand)), global_(global), precision_(std::move(precision)) {}

  bool enabled() const { return !global_.out.empty(); }

  void add(const std::string& name, const std::string& contents) {
    if (!enabled()) return;
    io::write_file_atomic(fs::path(global_.out) / name, contents);
    outputs_.push_back(name);
  }

  void set_input(const std::string& path, const std::string& contents) {
    input_path_ = path;
    input_hash_ = git_blob_hash(contents);
  }

  void set_parameters(json params) { parameters_ = std::move(params); }

  void finish() {
    if (!enabled()) return;
    json manifest{{"subcommand", subcommand_},
                  {"tool_version", kToolVersion},
                  {"precision", precision_},
                  {"seed", global_.seed},
                  {"config_path", input_path_},
                  {"config_hash", input_hash_},
                  {"parameters", parameters_},
                  {"outputs", outputs_}};
    io::write_file_atomic(fs::path(global_.out) / "manifest.json", manifest.dump(2) + "\n");
  }

 private:
  std::string subcommand_;
  GlobalOptions global_;
  std::string precision_;
  std::string input_path_;
  std::string input_hash_;
  json parameters_ = json::object();
  std::vector<std::string> outputs_;
};

json vector_json(const numerics::Vector& v) {
  json out = json::array();
  for (const auto& x : v) out.push_back(x.to_string());
  return out;
}

json trace_json(const model::ForwardTrace& t) {
  json tokens = json::array();
  for (const auto& f : t.tokens) tokens.push_back(vector_json(f));
  return {{"tokens", tokens},         {"scores", vector_json(t.scores)},
          {"weights", vector_json(t.weights)}, {"pooled", vector_json(t.pooled)},
          {"output", t.output.to_string()},    {"decision", t.decision ? 1 : 0}};
}

json bound_json(const shattering::VcBound& b) {
  return {{"W", b.W}, {"t", b.t}, {"vc_bound", b.bound}};
}

json bounds_for(int d, const model::MlpSpec& mlp) {
  using shattering::DivisionRule;
  return {{"per_coordinate",
           bound_json(shattering::vc_upper_bound(shattering::count_ops(d, mlp, {DivisionRule::kPerCoordinate})))},
          {"one", bound_json(shattering::vc_upper_bound(shattering::count_ops(d, mlp, {DivisionRule::kOne})))}};
}

// ---------------------------------------------------------------------------
// Subcommands

struct ForwardArgs {
  std::string spec;
  std::string word;
  bool exit_code = false;
};

int run_forward(const GlobalOptions& g, const ForwardArgs& a) {
  const auto cfg = numerics::PrecisionConfig::parse(g.precision);
  const auto spec = load_spec(a.spec, cfg);
  const auto word = parse_word(a.word);
  spec.validate_word(word);
  RunWriter writer("forward", g, cfg.to_string());
  writer.set_input(a.spec, read_text(a.spec));
  writer.set_parameters({{"word", word}});
  std::string rendered;
  bool decision = false;
  if (g.trace) {
    const auto t = model::trace_forward(spec, word);
    decision = t.decision;
    rendered = trace_json(t).dump(2) + "\n";
  } else {
    decision = model::forward(spec, word);
    rendered = std::string(decision ? "1" : "0") + "\n";
  }
  std::cout << rendered;
  writer.add("forward.txt", rendered);
  writer.finish();
  if (a.exit_code) return decision ? 1 : 0;
  return kOk;
}

struct PalDemoArgs {
  int n = 8;
  std::string low = "double";
  std::string high;  // default bigfloat:4n
  int base = 10;
  int samples = 4096;
  int random_words = 64;
};

int run_pal_demo(const GlobalOptions& g, const PalDemoArgs& a) {
  if (a.n < 2 || a.n % 2 != 0) throw InputError("pal-demo needs an even n >= 2");
  const auto low = numerics::PrecisionConfig::parse(a.low);
  const auto high = a.high.empty() ? numerics::PrecisionConfig::bigfloat(4 * a.n)
                                   : numerics::PrecisionConfig::parse(a.high);
  RunWriter writer("pal-demo", g, low.to_string() + " vs " + high.to_string());
  writer.set_parameters({{"n", a.n}, {"low", low.to_string()}, {"high", high.to_string()},
                         {"base", a.base}, {"samples", a.samples}, {"random_words", a.random_words}});

  const auto spec = construction::build_palindrome_transformer(a.n, high, {a.base});
  const auto summary = construction::verify_palindrome(spec, static_cast<std::uint64_t>(a.samples), g.seed);
  const std::vector<int> ns{a.n};
  const auto witnesses = construction::precision_failure_search(
      ns, low, [&](int) { return high; }, {a.base, a.random_words, g.seed});

  std::cout << "correct: " << summary.correct << "/" << summary.checked
            << (summary.exhaustive ? " (exhaustive)" : " (sampled)") << "\n";
  std::cout << "witnesses: " << witnesses.size() << "\n";

  json summary_json{{"n", a.n},
                    {"base", a.base},
                    {"high", high.to_string()},
                    {"low", low.to_string()},
                    {"checked", summary.checked},
                    {"correct", summary.correct},
                    {"exhaustive", summary.exhaustive},
                    {"tau_prime", spec.tau_prime.to_string()},
                    {"witnesses", witnesses.size()}};
  writer.add("pal_witnesses.csv", construction::witnesses_csv(witnesses));
  writer.add("pal_summary.json", summary_json.dump(2) + "\n");
  writer.add("pal_spec.json", io::to_json(spec.transformer).dump(2) + "\n");
  writer.finish();
  return kOk;
}

struct ShatterArgs {
  std::string spec;
  std::string task = "comp";
  int n = 0;
  std::string mode = "exhaustive";
  int samples = 1024;
};

int run_shatter(const GlobalOptions& g, const ShatterArgs& a) {
  const auto cfg = numerics::PrecisionConfig::parse(g.precision);
  const auto spec = load_spec(a.spec, cfg);
  const auto task = task_arg(a.task);
  const int n = a.n > 0 ? a.n : spec.n;
  require_task_alphabet(spec, task, n);
  RunWriter writer("shatter", g, cfg.to_string());
  writer.set_input(a.spec, read_text(a.spec));
  writer.set_parameters({{"task", a.task}, {"n", n}, {"mode", a.mode}, {"samples", a.samples}});

  std::vector<shattering::HypothesisPoint> points;
  shattering::ParamGenerator gen;
  if (task == tasks::Task::kComp) {
    points = shattering::comp_point_set(spec, n);
    gen = [&](const tasks::Bits& b) { return shattering::comp_params_for(spec, b); };
  } else if (task == tasks::Task::kSum2) {
    if (n % 2 != 0) throw InputError("sum2 needs even n");
    points = shattering::sum2_point_set(spec, n / 2);
    gen = [&](const tasks::Bits& b) { return shattering::sum2_params_for(spec, b); };
  } else {
    throw InputError("shatter supports comp and sum2");
  }
  const int m = static_cast<int>(points.size());
  std::vector<tasks::Bits> labelings;
  if (a.mode == "exhaustive") {
    if (m > 20) throw InputError("exhaustive mode supports at most 20 points; use --mode sampled");
    labelings = shattering::all_labelings(m);
  } else if (a.mode == "sampled") {
    std::mt19937_64 rng(g.seed);
    for (int s = 0; s < a.samples; ++s) {
      tasks::Bits bits(static_cast<std::size_t>(m));
      for (auto& b : bits) b = static_cast<int>(rng() & 1U);
      labelings.push_back(std::move(bits));
    }
  } else {
    throw ConfigError("mode must be 'exhaustive' or 'sampled'");
  }
  const auto table = shattering::shatter_table(spec, std::move(points), std::move(labelings), gen);
  json summary = table.summary();
  summary["task"] = a.task;
  summary["n"] = n;
  summary["mode"] = a.mode;
  summary["bounds"] = bounds_for(spec.d, spec.mlp);
  std::cout << summary.dump(2) << "\n";
  writer.add("shatter_table.csv", table.to_csv());
  writer.add("shatter_summary.json", summary.dump(2) + "\n");
  writer.finish();
  return kOk;
}

struct VcArgs {
  std::string spec;
  int d = 0;
  std::vector<int> hidden;
};

int run_vc_bound(const GlobalOptions& g, const VcArgs& a) {
  const auto cfg = numerics::PrecisionConfig::parse(g.precision);
  RunWriter writer("vc-bound", g, cfg.to_string());
  json out;
  if (!a.spec.empty()) {
    const auto spec = load_spec(a.spec, cfg);
    writer.set_input(a.spec, read_text(a.spec));
    out = bounds_for(spec.d, spec.mlp);
    out["d"] = spec.d;
    out["mlp_neurons"] = spec.mlp.neuron_count();
  } else {
    if (a.d < 1) throw ConfigError("vc-bound needs --spec or --d >= 1");
    using shattering::DivisionRule;
    out = {{"per_coordinate", bound_json(shattering::vc_upper_bound(
                                  shattering::count_ops(a.d, a.hidden, {DivisionRule::kPerCoordinate})))},
           {"one", bound_json(shattering::vc_upper_bound(shattering::count_ops(a.d, a.hidden, {DivisionRule::kOne})))},
           {"d", a.d}};
    int neurons = 0;
    for (int w : a.hidden) neurons += w;
    out["mlp_neurons"] = neurons;
  }
  writer.set_parameters({{"d", a.d}, {"hidden", a.hidden}});
  std::cout << out.dump(2) << "\n";
  writer.add("vc_bound.json", out.dump(2) + "\n");
  writer.finish();
  return kOk;
}

struct SweepArgs {
  std::string config;
};

int run_sweep(const GlobalOptions& g, const SweepArgs& a) {
  const std::string text = read_text(a.config);
  experiments::SweepConfig cfg;
  try {
    cfg = experiments::sweep_config_from_json(parse_json_text(text, "sweep config"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad sweep config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("bad sweep config: ") + e.what());
  }
  RunWriter writer("sweep", g, "double");
  writer.set_input(a.config, text);
  writer.set_parameters(experiments::to_json(cfg));
  const auto result = experiments::dimension_sweep(cfg);
  const std::string csv = result.to_csv();
  std::cout << csv;
  json meta{{"seed", cfg.seed},
            {"precision", io::to_json(numerics::PrecisionConfig::hardware())},
            {"config_hash", git_blob_hash(text)},
            {"rows", result.rows.size()},
            {"tool_version", kToolVersion}};
  writer.add("sweep.csv", csv);
  writer.add("sweep_meta.json", meta.dump(2) + "\n");
  writer.finish();
  return kOk;
}

struct AuditArgs {
  std::string spec;
  std::string task = "comp";
  int n = 0;
  int samples = 10000;
};

int run_audit(const GlobalOptions& g, const AuditArgs& a) {
  const auto cfg = numerics::PrecisionConfig::parse(g.precision);
  const auto spec = load_spec(a.spec, cfg);
  const auto task = task_arg(a.task);
  const int n = a.n > 0 ? a.n : spec.n;
  require_task_alphabet(spec, task, n);
  RunWriter writer("audit", g, cfg.to_string());
  writer.set_input(a.spec, read_text(a.spec));
  writer.set_parameters({{"task", a.task}, {"n", n}, {"samples", a.samples}});
  const auto report = experiments::shatter_audit(spec, task, n, {a.samples, g.seed, 12});
  const auto rendered = report.to_json().dump(2) + "\n";
  std::cout << rendered;
  writer.add("audit.json", rendered);
  writer.finish();
  return kOk;
}

struct PalSpecArgs {
  int n = 4;
  int base = 10;
  bool allow_odd = false;
};

int run_pal_spec(const GlobalOptions& g, const PalSpecArgs& a) {
  const auto cfg = numerics::PrecisionConfig::parse(g.precision);
  const auto spec = construction::build_palindrome_transformer(a.n, cfg, {a.base, a.allow_odd});
  RunWriter writer("pal-spec", g, cfg.to_string());
  writer.set_parameters({{"n", a.n}, {"base", a.base}, {"allow_odd", a.allow_odd}});
  const auto rendered = io::to_json(spec.transformer).dump(2) + "\n";
  std::cout << rendered;
  writer.add("spec.json", rendered);
  writer.finish();
  return kOk;
}

struct RandomSpecArgs {
  int n = 4;
  std::string task = "comp";
  int d = 2;
  std::vector<int> hidden{4};
  double scale = 1.0;
  bool constant = false;
  double constant_value = 1.0;
};

int run_random_spec(const GlobalOptions& g, const RandomSpecArgs& a) {
  const auto cfg = numerics::PrecisionConfig::parse(g.precision);
  const auto task = task_arg(a.task);
  auto spec = model::random_spec(a.n, tasks::alphabet(task, a.n, a.n), a.d, a.hidden, g.seed, cfg, a.scale);
  if (a.constant) spec.mlp = model::constant_mlp(a.d, a.constant_value, cfg);
  RunWriter writer("random-spec", g, cfg.to_string());
  writer.set_parameters({{"n", a.n}, {"task", a.task}, {"d", a.d}, {"hidden", a.hidden},
                         {"scale", a.scale}, {"constant", a.constant}});
  const auto rendered = io::to_json(spec).dump(2) + "\n";
  std::cout << rendered;
  writer.add("spec.json", rendered);
  writer.finish();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Laboratory for 1-layer single-token-output softmax transformers"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--precision", g.precision, "double | bigfloat:N")->capture_default_str();
  app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--out", g.out, "Directory for output files and manifest.json");
  app.add_flag("--trace", g.trace, "Dump intermediate quantities (forward)");

  ForwardArgs fa;
  auto* forward = app.add_subcommand("forward", "Evaluate a spec on one word");
  forward->add_option("--spec", fa.spec)->required();
  forward->add_option("--word", fa.word, "e.g. 1,0,0,1 or [1,0,0,1]")->required();
  forward->add_flag("--exit-code", fa.exit_code, "Exit with the decision bit");

  PalDemoArgs pa;
  auto* pal = app.add_subcommand("pal-demo", "Verify the palindrome construction and search precision failures");
  pal->add_option("--n", pa.n)->required();
  pal->add_option("--low", pa.low, "Low precision (double | bigfloat:N)")->capture_default_str();
  pal->add_option("--high", pa.high, "High precision, default bigfloat:4n");
  pal->add_option("--base", pa.base)->capture_default_str();
  pal->add_option("--samples", pa.samples, "Random words when n > 16")->capture_default_str();
  pal->add_option("--random-words", pa.random_words, "Random words in the precision search")->capture_default_str();

  ShatterArgs sa;
  auto* shatter = app.add_subcommand("shatter", "Build the shatter table of a spec");
  shatter->add_option("--spec", sa.spec)->required();
  shatter->add_option("--task", sa.task, "comp | sum2")->capture_default_str();
  shatter->add_option("--n", sa.n, "Defaults to the spec's n");
  shatter->add_option("--mode", sa.mode, "exhaustive | sampled")->capture_default_str();
  shatter->add_option("--samples", sa.samples)->capture_default_str();

  VcArgs va;
  auto* vc = app.add_subcommand("vc-bound", "Operation count and VC upper bound");
  vc->add_option("--spec", va.spec);
  vc->add_option("--d", va.d);
  vc->add_option("--hidden", va.hidden, "Hidden layer widths")->delimiter(',');

  SweepArgs wa;
  auto* sweep = app.add_subcommand("sweep", "Train a grid of configurations");
  sweep->add_option("--config", wa.config)->required();

  AuditArgs aa;
  auto* audit = app.add_subcommand("audit", "Count labelings a spec realizes");
  audit->add_option("--spec", aa.spec)->required();
  audit->add_option("--task", aa.task)->capture_default_str();
  audit->add_option("--n", aa.n);
  audit->add_option("--samples", aa.samples)->capture_default_str();

  PalSpecArgs ps;
  auto* pal_spec = app.add_subcommand("pal-spec", "Emit the palindrome construction as a spec file");
  pal_spec->add_option("--n", ps.n)->required();
  pal_spec->add_option("--base", ps.base)->capture_default_str();
  pal_spec->add_flag("--allow-odd", ps.allow_odd);

  RandomSpecArgs rs;
  auto* random = app.add_subcommand("random-spec", "Emit a seeded random spec for a task alphabet");
  random->add_option("--n", rs.n)->required();
  random->add_option("--task", rs.task)->capture_default_str();
  random->add_option("--d", rs.d)->capture_default_str();
  random->add_option("--hidden", rs.hidden)->delimiter(',');
  random->add_option("--scale", rs.scale)->capture_default_str();
  random->add_flag("--constant", rs.constant, "Replace the MLP with a constant");
  random->add_option("--constant-value", rs.constant_value)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*forward) return run_forward(g, fa);
    if (*pal) return run_pal_demo(g, pa);
    if (*shatter) return run_shatter(g, sa);
    if (*vc) return run_vc_bound(g, va);
    if (*sweep) return run_sweep(g, wa);
    if (*audit) return run_audit(g, aa);
    if (*pal_spec) return run_pal_spec(g, ps);
    if (*random) return run_random_spec(g, rs);
  } catch (const SpecError& e) {
    std::cerr << "spec error: " << e.what() << "\n";
    return kBadSpec;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kBadSpec;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
