#include "fedsel/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "fedsel/metrics_io.hpp"
#include "fedsel/optimize.hpp"
#include "fedsel/quadratic.hpp"
#include "fedsel/synthetic.hpp"

namespace fedsel::harness {
namespace {

std::string sanitize_label(const std::string& label) {
  std::string out = label;
  std::replace(out.begin(), out.end(), ':', '_');
  return out;
}

std::string metrics_filename(const StrategySpec& strategy, int seed_index) {
  return "metrics_" + sanitize_label(strategy.label) + "_s" + std::to_string(seed_index) + ".csv";
}

TaskOptima task_optima(const Task& task) {
  if (const auto* quadratic = dynamic_cast<const QuadraticTask*>(&task)) {
    return quadratic_optima(*quadratic);
  }
  return numeric_optima(task);
}

void write_task_info(const std::filesystem::path& dir, const TaskSpec& task_spec, const Task& task,
                     const ExperimentSpec* run_spec) {
  KeyValueList kv;
  kv.emplace_back("kind", task_spec.kind == TaskSpec::Kind::kQuadratic ? "quadratic" : "synthetic");
  kv.emplace_back("clients", std::to_string(task.client_count()));
  kv.emplace_back("dimension", std::to_string(task.dimension()));
  kv.emplace_back("power_law_a", format_double(task_spec.power_law_a));
  kv.emplace_back("task_seed", std::to_string(task_spec.task_seed));
  std::string fractions;
  for (int k = 0; k < task.client_count(); ++k) {
    if (k > 0) fractions += ",";
    fractions += format_double(task.fractions()[k]);
  }
  kv.emplace_back("p", fractions);
  if (run_spec != nullptr) {
    std::string labels;
    for (const StrategySpec& s : run_spec->strategies) {
      if (!labels.empty()) labels += ",";
      labels += s.label;
    }
    kv.emplace_back("strategies", labels);
    kv.emplace_back("seeds", std::to_string(run_spec->num_seeds));
    kv.emplace_back("base_seed", std::to_string(run_spec->base_seed));
  }
  write_key_values(dir / "task_info.txt", kv);
}

struct RunJob {
  const StrategySpec* strategy;
  int seed_index;
};

// Mean and sample standard deviation per round for one strategy.
void append_comparison(const std::filesystem::path& dir, const ExperimentSpec& spec,
                       std::ostream& diag) {
  std::vector<std::vector<std::vector<double>>> losses(spec.strategies.size());
  for (std::size_t s = 0; s < spec.strategies.size(); ++s) {
    losses[s].resize(static_cast<std::size_t>(spec.num_seeds));
    for (int seed = 0; seed < spec.num_seeds; ++seed) {
      const auto rows = read_metrics_file(dir / metrics_filename(spec.strategies[s], seed));
      losses[s][static_cast<std::size_t>(seed)].reserve(rows.size());
      for (const MetricsRow& row : rows) {
        losses[s][static_cast<std::size_t>(seed)].push_back(row.global_loss);
      }
    }
  }

  std::ostringstream table;
  table << "round";
  for (const StrategySpec& s : spec.strategies) {
    table << ",mean_" << s.label << ",std_" << s.label;
  }
  table << '\n';
  for (int round = 0; round < spec.rounds; ++round) {
    table << round;
    for (std::size_t s = 0; s < spec.strategies.size(); ++s) {
      double mean = 0.0;
      for (int seed = 0; seed < spec.num_seeds; ++seed) {
        mean += losses[s][static_cast<std::size_t>(seed)][static_cast<std::size_t>(round)];
      }
      mean /= static_cast<double>(spec.num_seeds);
      double var = 0.0;
      for (int seed = 0; seed < spec.num_seeds; ++seed) {
        const double d =
            losses[s][static_cast<std::size_t>(seed)][static_cast<std::size_t>(round)] - mean;
        var += d * d;
      }
      const double sd = spec.num_seeds > 1
                            ? std::sqrt(var / static_cast<double>(spec.num_seeds - 1))
                            : 0.0;
      table << ',' << format_double(mean) << ',' << format_double(sd);
    }
    table << '\n';
  }
  write_text_file(dir / "comparison.csv", table.str());

  KeyValueList summary;
  for (std::size_t s = 0; s < spec.strategies.size(); ++s) {
    const std::string& label = spec.strategies[s].label;
    double final_mean = 0.0;
    for (int seed = 0; seed < spec.num_seeds; ++seed) {
      final_mean += losses[s][static_cast<std::size_t>(seed)].back();
    }
    final_mean /= static_cast<double>(spec.num_seeds);
    summary.emplace_back("final_loss_mean." + label, format_double(final_mean));

    if (spec.target_loss.has_value()) {
      std::string per_seed;
      double reached_sum = 0.0;
      int reached = 0;
      for (int seed = 0; seed < spec.num_seeds; ++seed) {
        const auto& seq = losses[s][static_cast<std::size_t>(seed)];
        int hit = -1;
        for (std::size_t round = 0; round < seq.size(); ++round) {
          if (seq[round] <= *spec.target_loss) {
            hit = static_cast<int>(round);
            break;
          }
        }
        if (!per_seed.empty()) per_seed += ",";
        per_seed += hit >= 0 ? std::to_string(hit) : std::string("none");
        if (hit >= 0) {
          reached_sum += hit;
          ++reached;
        }
      }
      summary.emplace_back("rounds_to_target." + label, per_seed);
      summary.emplace_back("rounds_to_target_mean." + label,
                           reached > 0 ? format_double(reached_sum / reached) : "none");
    }
  }
  if (spec.target_loss.has_value()) {
    summary.emplace_back("target_loss", format_double(*spec.target_loss));
  }
  write_key_values(dir / "comparison_summary.txt", summary);
  diag << "wrote comparison for " << spec.strategies.size() << " strategies x " << spec.num_seeds
       << " seeds\n";
}

// Runs `body(0..job_count)` on up to `parallelism` threads. Returns kExitOk
// or the code of the first failure, with its message in `error_out`.
int run_jobs_parallel(int parallelism, int job_count, const std::function<void(int)>& body,
                      std::string& error_out) {
  std::atomic<int> next{0};
  std::atomic<int> exit_code{kExitOk};
  std::mutex error_mutex;

  auto worker = [&] {
    for (int job = next.fetch_add(1); job < job_count; job = next.fetch_add(1)) {
      if (exit_code.load() != kExitOk) return;
      try {
        body(job);
      } catch (const DivergenceError& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (error_out.empty()) error_out = e.what();
        exit_code.store(kExitDivergence);
        return;
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (error_out.empty()) error_out = e.what();
        exit_code.store(kExitError);
        return;
      }
    }
  };

  const int workers = std::max(1, std::min(parallelism, job_count));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  return exit_code.load();
}

}  // namespace

std::filesystem::path resolve_out_dir(const std::filesystem::path& cli_out,
                                      const std::filesystem::path& spec) {
  if (!cli_out.empty()) return cli_out;
  if (const char* env = std::getenv("FEDSEL_OUT_DIR"); env != nullptr && *env != '\0') {
    return std::filesystem::path(env);
  }
  return std::filesystem::path(spec.stem().string() + "_out");
}

int cmd_run(const CommandOptions& options, std::ostream& diag) {
  ExperimentSpec spec;
  std::unique_ptr<Task> task;
  try {
    spec = ExperimentSpec::load(options.spec);
    if (options.seed_override.has_value()) {
      const std::uint64_t base = *options.seed_override;
      const bool retask = spec.task.task_seed == spec.base_seed;
      spec.base_seed = base;
      if (retask) spec.task.task_seed = base;
    }
    task = spec.task.build();
    for (const StrategySpec& strategy : spec.strategies) {
      spec.run_config(strategy, 0).validate(*task);
    }
  } catch (const SpecError& e) {
    diag << "spec error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    diag << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  const std::filesystem::path dir = options.out_dir;
  std::filesystem::create_directories(dir);

  std::vector<RunJob> jobs;
  for (const StrategySpec& strategy : spec.strategies) {
    for (int seed = 0; seed < spec.num_seeds; ++seed) {
      jobs.push_back(RunJob{&strategy, seed});
    }
  }

  auto run_one = [&](int index) {
    const RunJob& job = jobs[static_cast<std::size_t>(index)];
    const RunConfig config = spec.run_config(*job.strategy, job.seed_index);
    const std::vector<RoundRecord> records = run_training(*task, config);
    write_metrics_file(dir / metrics_filename(*job.strategy, job.seed_index), records);

    KeyValueList kv;
    kv.emplace_back("strategy", job.strategy->label);
    kv.emplace_back("seed_index", std::to_string(job.seed_index));
    kv.emplace_back("run_seed", std::to_string(config.seed));
    kv.emplace_back("rounds", std::to_string(spec.rounds));
    kv.emplace_back("final_loss", format_double(records.back().global_loss));
    kv.emplace_back("final_eval", format_double(records.back().eval_metric));
    double max_grad = 0.0;
    for (const RoundRecord& rec : records) max_grad = std::max(max_grad, rec.max_grad_norm);
    kv.emplace_back("max_grad_norm", format_double(max_grad));
    if (spec.target_loss.has_value()) {
      const auto hit = rounds_to_target(records, *spec.target_loss, TargetMetric::kGlobalLossAtMost);
      kv.emplace_back("rounds_to_target", hit ? std::to_string(*hit) : std::string("none"));
    }
    write_key_values(dir / ("summary_" + sanitize_label(job.strategy->label) + "_s" +
                            std::to_string(job.seed_index) + ".txt"),
                     kv);
  };

  std::string job_error;
  const int job_code =
      run_jobs_parallel(options.parallelism, static_cast<int>(jobs.size()), run_one, job_error);
  if (job_code != kExitOk) {
    diag << "run failed: " << job_error << '\n';
    return job_code;
  }

  write_task_info(dir, spec.task, *task, &spec);
  if (spec.export_dataset) {
    const auto& logistic = dynamic_cast<const SyntheticLogisticTask&>(*task);
    std::ostringstream buffer;
    export_dataset(logistic.data(), buffer);
    write_text_file(dir / "dataset.txt", buffer.str());
  }
  {
    std::ostringstream index;
    index << "strategy,seed_index,run_seed,file\n";
    for (const RunJob& job : jobs) {
      index << job.strategy->label << ',' << job.seed_index << ',' << spec.run_seed(job.seed_index)
            << ',' << metrics_filename(*job.strategy, job.seed_index) << '\n';
    }
    write_text_file(dir / "runs_index.csv", index.str());
  }
  append_comparison(dir, spec, diag);
  return kExitOk;
}

int cmd_skew(const CommandOptions& options, std::ostream& diag) {
  SkewSpec spec;
  std::unique_ptr<Task> task;
  try {
    spec = SkewSpec::load(options.spec);
    if (options.seed_override.has_value()) {
      const std::uint64_t base = *options.seed_override;
      const bool retask = spec.task.task_seed == spec.base_seed;
      spec.base_seed = base;
      if (retask) spec.task.task_seed = base;
    }
    task = spec.task.build();
    for (const StrategySpec& strategy : spec.strategies) {
      strategy.config.validate(task->client_count());
      if (strategy.config.kind == StrategyKind::kRPowD) {
        throw SpecError(options.spec.string() + ": rpow-d has no model-indexed skew");
      }
    }
  } catch (const SpecError& e) {
    diag << "spec error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    diag << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  const std::filesystem::path dir = options.out_dir;
  std::filesystem::create_directories(dir);

  try {
    const TaskOptima optima = task_optima(*task);
    const GridSpec grid = make_grid_spec(optima, spec.grid_samples);
    const double gap = local_global_gap(*task, optima);

    std::ostringstream table;
    table << "strategy,d,repetition,rho_bar,rho_tilde,rho_ratio,skipped_points\n";
    KeyValueList report;
    report.emplace_back("gap", format_double(gap));
    report.emplace_back("grid_half_width", format_double(grid.half_width));
    report.emplace_back("grid_samples_per_role", std::to_string(grid.samples_per_role));
    report.emplace_back("monte_carlo_draws", std::to_string(spec.draws));
    report.emplace_back("repetitions", std::to_string(spec.repetitions));

    for (const StrategySpec& strategy : spec.strategies) {
      for (int rep = 0; rep < spec.repetitions; ++rep) {
        const std::uint64_t seed = spec.base_seed + static_cast<std::uint64_t>(rep);
        const SkewEstimate est = estimate_rho_bounds(strategy.config, *task, optima, grid,
                                                     spec.draws, seed, spec.weighting,
                                                     options.parallelism);
        const int d = strategy.config.kind == StrategyKind::kRand
                          ? strategy.config.selected_count
                          : strategy.config.candidate_count;
        table << strategy.label << ',' << d << ',' << rep << ',' << format_double(est.rho_bar)
              << ',' << format_double(est.rho_tilde) << ','
              << format_double(est.rho_tilde / est.rho_bar) << ',' << est.skipped_points << '\n';
        const std::string prefix = strategy.label + ".rep" + std::to_string(rep);
        report.emplace_back(prefix + ".rho_bar", format_double(est.rho_bar));
        report.emplace_back(prefix + ".rho_tilde", format_double(est.rho_tilde));
        report.emplace_back(prefix + ".rho_ratio", format_double(est.rho_tilde / est.rho_bar));
        report.emplace_back(prefix + ".skipped_points", std::to_string(est.skipped_points));
        if (est.tilde_degenerate) report.emplace_back(prefix + ".rho_tilde_degenerate", "true");
        diag << strategy.label << " rep " << rep << ": rho_bar=" << est.rho_bar
             << " rho_tilde=" << est.rho_tilde << '\n';
      }
    }
    write_text_file(dir / "skew_table.csv", table.str());
    write_key_values(dir / "skew_report.txt", report);
  } catch (const std::exception& e) {
    diag << "skew estimation failed: " << e.what() << '\n';
    return kExitError;
  }
  return kExitOk;
}

int cmd_freq(const FreqOptions& options, std::ostream& diag) {
  const std::filesystem::path dir = options.metrics_dir;
  std::map<std::string, std::vector<std::string>> files_by_strategy;
  std::vector<double> p;

  try {
    std::ifstream index(dir / "runs_index.csv");
    if (!index) throw SpecError("missing runs_index.csv in " + dir.string());
    std::string line;
    std::getline(index, line);  // header
    while (std::getline(index, line)) {
      if (line.empty()) continue;
      std::istringstream row(line);
      std::string strategy, seed, run_seed, file;
      std::getline(row, strategy, ',');
      std::getline(row, seed, ',');
      std::getline(row, run_seed, ',');
      std::getline(row, file, ',');
      files_by_strategy[strategy].push_back(file);
    }
    if (files_by_strategy.empty()) throw SpecError("runs_index.csv lists no runs");

    std::ifstream info(dir / "task_info.txt");
    if (!info) throw SpecError("missing task_info.txt in " + dir.string());
    while (std::getline(info, line)) {
      if (line.rfind("p = ", 0) == 0) {
        std::istringstream ps(line.substr(4));
        std::string item;
        while (std::getline(ps, item, ',')) p.push_back(std::stod(item));
      }
    }
    if (p.empty()) throw SpecError("task_info.txt carries no data fractions");
  } catch (const SpecError& e) {
    diag << "freq error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    std::ostringstream out;
    out << "strategy,rank,client,ratio,p\n";
    for (const auto& [strategy, files] : files_by_strategy) {
      std::vector<double> counts(p.size(), 0.0);
      double total = 0.0;
      for (const std::string& file : files) {
        for (const MetricsRow& row : read_metrics_file(dir / file)) {
          if (row.selected.empty()) {
            throw std::runtime_error(file + ": no selection history column content");
          }
          for (int k : row.selected) {
            counts[static_cast<std::size_t>(k)] += 1.0;
            total += 1.0;
          }
        }
      }
      std::vector<int> order(p.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (counts[static_cast<std::size_t>(a)] != counts[static_cast<std::size_t>(b)]) {
          return counts[static_cast<std::size_t>(a)] > counts[static_cast<std::size_t>(b)];
        }
        return a < b;
      });
      for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const int client = order[rank];
        out << strategy << ',' << rank << ',' << client << ','
            << format_double(counts[static_cast<std::size_t>(client)] / total) << ','
            << format_double(p[static_cast<std::size_t>(client)]) << '\n';
      }
    }
    std::filesystem::create_directories(options.out_dir);
    write_text_file(options.out_dir / "freq_profile.csv", out.str());
  } catch (const std::exception& e) {
    diag << "freq error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}

int cmd_bound(const CommandOptions& options, std::ostream& diag) {
  BoundSpec spec;
  try {
    spec = BoundSpec::load(options.spec);
  } catch (const SpecError& e) {
    diag << "spec error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    diag << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  const std::filesystem::path dir = options.out_dir;
  std::filesystem::create_directories(dir);

  try {
    BoundInputs inputs = spec.inputs;
    if (spec.derive) {
      if (spec.task.kind != TaskSpec::Kind::kQuadratic) {
        diag << "config error: bound derivation needs a quadratic task\n";
        return kExitConfig;
      }
      const std::unique_ptr<Task> task = spec.task.build();
      const auto& quadratic = dynamic_cast<const QuadraticTask&>(*task);
      const TaskOptima optima = quadratic_optima(quadratic);

      // Calibration trajectory under the decaying rate the bound assumes.
      double L = 0.0;
      double mu = std::numeric_limits<double>::infinity();
      for (int k = 0; k < quadratic.client_count(); ++k) {
        L = std::max(L, quadratic.curvature(k));
        mu = std::min(mu, quadratic.curvature(k));
      }
      RunConfig config;
      config.selection = spec.strategy.config;
      config.local_steps = spec.local_steps;
      config.rounds = spec.derive_rounds;
      config.lr = LrSchedule::decaying(1.0 / mu, 4.0 * L / mu);
      config.seed = spec.base_seed;
      const std::vector<RoundRecord> records = run_training(*task, config);
      double max_grad = 0.0;
      for (const RoundRecord& rec : records) max_grad = std::max(max_grad, rec.max_grad_norm);

      inputs.params = estimate_theory_params(*task, max_grad, spec.local_steps,
                                             spec.strategy.config.selected_count, spec.g_slack);
      inputs.gap = local_global_gap(*task, optima);
      const SkewEstimate est =
          estimate_rho_bounds(spec.strategy.config, *task, optima,
                              make_grid_spec(optima, spec.grid_samples), spec.draws,
                              spec.base_seed, SkewWeighting::kUniformMean, options.parallelism);
      inputs.rho_bar = est.rho_bar;
      inputs.rho_tilde = est.rho_tilde;
      const ParamVector w0 = vec::zeros(static_cast<std::size_t>(task->dimension()));
      inputs.initial_sq_dist = vec::squared_distance(w0, optima.global_opt);
      inputs.initial_gap = global_loss(*task, w0) - optima.global_value;
      inputs.validate();
    }

    KeyValueList report;
    report.emplace_back("L", format_double(inputs.params.L));
    report.emplace_back("mu", format_double(inputs.params.mu));
    report.emplace_back("G", format_double(inputs.params.G));
    report.emplace_back("sigma", format_double(inputs.params.sigma));
    report.emplace_back("tau", std::to_string(inputs.params.tau));
    report.emplace_back("m", std::to_string(inputs.params.m));
    report.emplace_back("gap", format_double(inputs.gap));
    report.emplace_back("rho_bar", format_double(inputs.rho_bar));
    report.emplace_back("rho_tilde", format_double(inputs.rho_tilde));
    report.emplace_back("initial_sq_dist", format_double(inputs.initial_sq_dist));
    report.emplace_back("initial_gap", format_double(inputs.initial_gap));
    if (spec.eta.has_value()) report.emplace_back("eta", format_double(*spec.eta));

    std::ostringstream table;
    table << "bound,T,vanishing,bias,total\n";
    for (double T : spec.iteration_counts) {
      const BoundTerms t1 = decaying_rate_bound(inputs, T);
      table << "decaying_rate," << format_double(T) << ',' << format_double(t1.vanishing) << ','
            << format_double(t1.bias) << ',' << format_double(t1.total) << '\n';
    }
    if (spec.eta.has_value()) {
      for (double T : spec.iteration_counts) {
        const BoundTerms t2 = fixed_rate_bound(inputs, *spec.eta, T);
        table << "fixed_rate," << format_double(T) << ',' << format_double(t2.vanishing) << ','
              << format_double(t2.bias) << ',' << format_double(t2.total) << '\n';
      }
    }
    write_text_file(dir / "bound_table.csv", table.str());
    write_key_values(dir / "bound_report.txt", report);
  } catch (const std::invalid_argument& e) {
    diag << "bound error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    diag << "bound error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitOk;
}

}  // namespace fedsel::harness
