#include <charconv>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "onelayer/experiments.hpp"
#include "onelayer/parallel.hpp"

namespace onelayer::experiments {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

int points_for(tasks::Task task, int n) { return task == tasks::Task::kComp ? n - 1 : n / 2; }

MlpShape shape_from_json(const nlohmann::json& j) {
  MlpShape shape;
  if (j.is_string() && j.get<std::string>() == "constant") {
    shape.constant = true;
    return shape;
  }
  if (j.is_array()) {
    shape.hidden = j.get<std::vector<int>>();
    return shape;
  }
  shape.hidden = j.value("hidden", std::vector<int>{});
  shape.constant = j.value("constant", false);
  return shape;
}

}  // namespace

std::string SweepResult::to_csv() const {
  std::ostringstream out;
  out << "task,n,d,mlp,mlp_neurons,train_accuracy,initial_accuracy,best_step,final_loss,"
         "W,t,vc_bound,t_div_one,vc_bound_div_one,points_count,status\n";
  for (const auto& r : rows) {
    out << tasks::task_name(r.task) << ',' << r.n << ',' << r.d << ',' << r.mlp << ','
        << r.mlp_neurons << ',' << format_double(r.train_accuracy) << ','
        << format_double(r.initial_accuracy) << ',' << r.best_step << ','
        << format_double(r.final_loss) << ',' << r.bound.W << ',' << r.bound.t << ','
        << r.bound.bound << ',' << r.bound_div_one.t << ',' << r.bound_div_one.bound << ','
        << r.points_count << ',' << r.status << '\n';
  }
  return out.str();
}

SweepConfig sweep_config_from_json(const nlohmann::json& j) {
  SweepConfig cfg;
  cfg.task = tasks::parse_task(j.at("task").get<std::string>());
  cfg.n = j.at("n").get<int>();
  cfg.d_list = j.value("d_list", std::vector<int>{});
  if (j.contains("mlp_list")) {
    for (const auto& m : j.at("mlp_list")) cfg.mlp_list.push_back(shape_from_json(m));
  }
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.steps = j.value("steps", cfg.steps);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.sample_size = j.value("sample_size", cfg.sample_size);
  return cfg;
}

nlohmann::json to_json(const SweepConfig& cfg) {
  nlohmann::json mlps = nlohmann::json::array();
  for (const auto& m : cfg.mlp_list) mlps.push_back({{"hidden", m.hidden}, {"constant", m.constant}});
  return {{"task", tasks::task_name(cfg.task)}, {"n", cfg.n},
          {"d_list", cfg.d_list},               {"mlp_list", mlps},
          {"learning_rate", cfg.learning_rate}, {"steps", cfg.steps},
          {"seed", cfg.seed},                   {"sample_size", cfg.sample_size}};
}

SweepResult dimension_sweep(const SweepConfig& cfg) {
  struct Job {
    int d;
    MlpShape mlp;
  };
  std::vector<Job> jobs;
  for (int d : cfg.d_list) {
    for (const auto& m : cfg.mlp_list) jobs.push_back({d, m});
  }
  SweepResult result;
  result.rows.resize(jobs.size());
  if (jobs.empty()) return result;

  const Dataset data = make_dataset(cfg.task, cfg.n, cfg.sample_size, cfg.seed);
  parallel_for(jobs.size(), [&](std::size_t i) {
    const auto& job = jobs[i];
    SweepRow& row = result.rows[i];
    row.task = cfg.task;
    row.n = cfg.n;
    row.d = job.d;
    row.mlp = job.mlp.label();
    row.mlp_neurons = job.mlp.neurons();
    row.points_count = points_for(cfg.task, cfg.n);
    try {
      const std::vector<int> hidden = job.mlp.constant ? std::vector<int>{} : job.mlp.hidden;
      row.bound = shattering::vc_upper_bound(shattering::count_ops(job.d, hidden));
      row.bound_div_one = shattering::vc_upper_bound(
          shattering::count_ops(job.d, hidden, {shattering::DivisionRule::kOne}));
      TrainConfig tc;
      tc.task = cfg.task;
      tc.n = cfg.n;
      tc.d = job.d;
      tc.mlp = job.mlp;
      tc.learning_rate = cfg.learning_rate;
      tc.steps = cfg.steps;
      tc.seed = cfg.seed;
      tc.sample_size = cfg.sample_size;
      const auto trained = train(tc, data);
      row.train_accuracy = trained.accuracy;
      row.initial_accuracy = trained.initial_accuracy;
      row.best_step = trained.best_step;
      row.final_loss = trained.final_loss;
      if (trained.diverged) row.status = "diverged";
    } catch (const std::exception& e) {
      std::string msg = e.what();
      for (auto& c : msg) {
        if (c == ',' || c == '\n') c = ' ';
      }
      row.status = "error: " + msg;
    }
  });
  return result;
}

nlohmann::json AuditReport::to_json() const {
  return {{"task", tasks::task_name(task)},
          {"n", n},
          {"points", points},
          {"labelings_checked", labelings_checked},
          {"sampled", sampled},
          {"realized_count", realized_count},
          {"forward_realized_count", forward_realized_count},
          {"mismatches", mismatches},
          {"W", bound.W},
          {"t", bound.t},
          {"vc_bound", bound.bound}};
}

AuditReport shatter_audit(const TransformerSpec& spec, tasks::Task task, int n,
                          const AuditOptions& options) {
  AuditReport report;
  report.task = task;
  report.n = n;
  std::vector<shattering::HypothesisPoint> points;
  if (task == tasks::Task::kComp) {
    points = shattering::comp_point_set(spec, n);
  } else if (task == tasks::Task::kSum2) {
    if (n % 2 != 0) throw std::invalid_argument("sum2 audit needs even n");
    points = shattering::sum2_point_set(spec, n / 2);
  } else {
    throw std::invalid_argument("audits cover the comp and sum2 families only");
  }
  const int m = static_cast<int>(points.size());
  report.points = m;
  report.bound = shattering::vc_upper_bound(shattering::count_ops(spec.d, spec.mlp));

  std::vector<tasks::Bits> labelings;
  const bool exhaustive =
      n <= options.exhaustive_max_n || (m < 62 && (std::uint64_t{1} << m) <= static_cast<std::uint64_t>(options.sample_size));
  if (exhaustive) {
    labelings = shattering::all_labelings(m);
  } else {
    report.sampled = true;
    std::mt19937_64 rng(options.seed);
    for (int s = 0; s < options.sample_size; ++s) {
      tasks::Bits bits(static_cast<std::size_t>(m));
      for (auto& b : bits) b = static_cast<int>(rng() & 1U);
      labelings.push_back(std::move(bits));
    }
  }
  report.labelings_checked = labelings.size();

  std::vector<tasks::Bits> via_forward(labelings.size(), tasks::Bits(static_cast<std::size_t>(m), 0));
  auto generator = [&](const tasks::Bits& labeling) {
    return task == tasks::Task::kComp ? shattering::comp_params_for(spec, labeling)
                                      : shattering::sum2_params_for(spec, labeling);
  };
  const auto table = shattering::shatter_table(spec, points, labelings, generator);
  parallel_for(labelings.size(), [&](std::size_t r) {
    for (int i = 0; i < m; ++i) {
      const auto word = task == tasks::Task::kComp ? shattering::comp_word_for(n, i, labelings[r])
                                                   : shattering::sum2_word_for(n / 2, i, labelings[r]);
      via_forward[r][static_cast<std::size_t>(i)] = model::forward(spec, word) ? 1 : 0;
    }
  });

  std::set<tasks::Bits> realized;
  std::set<tasks::Bits> forward_realized;
  for (std::size_t r = 0; r < labelings.size(); ++r) {
    if (table.row_matches(r)) realized.insert(labelings[r]);
    if (via_forward[r] == labelings[r]) forward_realized.insert(labelings[r]);
    for (int i = 0; i < m; ++i) {
      if (via_forward[r][static_cast<std::size_t>(i)] != table.realized[r][static_cast<std::size_t>(i)]) {
        ++report.mismatches;
      }
    }
  }
  report.realized_count = realized.size();
  report.forward_realized_count = forward_realized.size();
  return report;
}

}  // namespace onelayer::experiments
