#include "fedsel/spec_file.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "fedsel/quadratic.hpp"
#include "fedsel/synthetic.hpp"

namespace fedsel {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

std::map<std::string, std::string> parse_flat_spec(std::istream& in) {
  std::map<std::string, std::string> values;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw SpecError("spec line " + std::to_string(line_number) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw SpecError("spec line " + std::to_string(line_number) + ": empty key");
    }
    if (!values.emplace(key, value).second) {
      throw SpecError("spec line " + std::to_string(line_number) + ": duplicate key '" + key + "'");
    }
  }
  return values;
}

std::map<std::string, std::string> load_flat_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open spec file: " + path.string());
  return parse_flat_spec(in);
}

SpecReader::SpecReader(std::map<std::string, std::string> values, std::string origin)
    : values_(std::move(values)), origin_(std::move(origin)) {
  for (const auto& [key, value] : values_) consumed_[key] = false;
}

bool SpecReader::has(const std::string& key) const { return values_.count(key) > 0; }

std::string SpecReader::take(const std::string& key) {
  auto it = values_.find(key);
  if (it == values_.end()) fail("missing required key '" + key + "'");
  consumed_[key] = true;
  return it->second;
}

std::string SpecReader::get_string(const std::string& key) { return take(key); }

std::string SpecReader::get_string_or(const std::string& key, const std::string& fallback) {
  if (!has(key)) return fallback;
  return take(key);
}

long long SpecReader::get_int(const std::string& key) {
  const std::string raw = take(key);
  try {
    std::size_t used = 0;
    const long long v = std::stoll(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    fail("key '" + key + "': expected integer, got '" + raw + "'");
  }
}

long long SpecReader::get_int_or(const std::string& key, long long fallback) {
  if (!has(key)) return fallback;
  return get_int(key);
}

double SpecReader::get_double(const std::string& key) {
  const std::string raw = take(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    fail("key '" + key + "': expected number, got '" + raw + "'");
  }
}

double SpecReader::get_double_or(const std::string& key, double fallback) {
  if (!has(key)) return fallback;
  return get_double(key);
}

bool SpecReader::get_bool_or(const std::string& key, bool fallback) {
  if (!has(key)) return fallback;
  const std::string raw = take(key);
  if (raw == "true" || raw == "1" || raw == "yes") return true;
  if (raw == "false" || raw == "0" || raw == "no") return false;
  fail("key '" + key + "': expected boolean, got '" + raw + "'");
}

std::vector<std::string> SpecReader::get_list(const std::string& key) {
  const std::string raw = take(key);
  std::vector<std::string> items;
  std::istringstream stream(raw);
  std::string item;
  while (std::getline(stream, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

std::vector<std::string> SpecReader::get_list_or(const std::string& key) {
  if (!has(key)) return {};
  return get_list(key);
}

void SpecReader::fail(const std::string& message) const {
  throw SpecError(origin_ + ": " + message);
}

void SpecReader::finish() const {
  std::string unknown;
  for (const auto& [key, used] : consumed_) {
    if (!used) {
      if (!unknown.empty()) unknown += ", ";
      unknown += key;
    }
  }
  if (!unknown.empty()) fail("unknown key(s): " + unknown);
}

TaskSpec TaskSpec::parse(SpecReader& reader, std::uint64_t default_seed) {
  TaskSpec spec;
  const std::string kind = reader.get_string("kind");
  if (kind == "quadratic") {
    spec.kind = Kind::kQuadratic;
  } else if (kind == "synthetic") {
    spec.kind = Kind::kSynthetic;
  } else {
    reader.fail("kind must be 'quadratic' or 'synthetic', got '" + kind + "'");
  }
  spec.clients = static_cast<int>(reader.get_int("clients"));
  spec.power_law_a = reader.get_double_or("power_law_a", 3.0);
  spec.task_seed = static_cast<std::uint64_t>(reader.get_int_or(
      "task_seed", static_cast<long long>(default_seed)));
  if (spec.kind == Kind::kQuadratic) {
    spec.dimension = static_cast<int>(reader.get_int("dimension"));
  } else {
    spec.alpha = reader.get_double_or("alpha", 1.0);
    spec.beta = reader.get_double_or("beta", 1.0);
    spec.min_client_samples =
        static_cast<std::size_t>(reader.get_int_or("min_client_samples", 50));
    spec.size_scale = static_cast<std::size_t>(reader.get_int_or("size_scale", 450));
    spec.l2 = reader.get_double_or("l2", 0.0);
  }
  if (spec.clients < 1) reader.fail("clients must be >= 1");
  return spec;
}

std::unique_ptr<Task> TaskSpec::build() const {
  if (kind == Kind::kQuadratic) {
    return std::make_unique<QuadraticTask>(
        generate_quadratic(clients, dimension, power_law_a, task_seed));
  }
  auto data = std::make_shared<const SyntheticDataset>(generate_synthetic(
      alpha, beta, clients, power_law_a, task_seed, min_client_samples, size_scale));
  return std::make_unique<SyntheticLogisticTask>(std::move(data), l2);
}

StrategySpec parse_strategy_token(const std::string& token, int selected_count,
                                  std::size_t estimate_batch_size) {
  StrategySpec spec;
  spec.label = token;
  spec.config.selected_count = selected_count;
  spec.config.estimate_batch_size = estimate_batch_size;

  std::string name = token;
  int d = 0;
  const auto colon = token.find(':');
  if (colon != std::string::npos) {
    name = token.substr(0, colon);
    try {
      d = std::stoi(token.substr(colon + 1));
    } catch (const std::exception&) {
      throw SpecError("strategy '" + token + "': bad candidate count");
    }
  }

  if (name == "rand") {
    spec.config.kind = StrategyKind::kRand;
    spec.config.with_replacement = true;
  } else if (name == "rand_wor") {
    spec.config.kind = StrategyKind::kRand;
    spec.config.with_replacement = false;
  } else if (name == "pow-d") {
    spec.config.kind = StrategyKind::kPowD;
  } else if (name == "cpow-d") {
    spec.config.kind = StrategyKind::kCPowD;
  } else if (name == "rpow-d") {
    spec.config.kind = StrategyKind::kRPowD;
  } else {
    throw SpecError("unknown strategy '" + token +
                    "' (expected rand, rand_wor, pow-d:<d>, cpow-d:<d>, rpow-d:<d>)");
  }

  if (spec.config.kind == StrategyKind::kRand) {
    if (colon != std::string::npos) {
      throw SpecError("strategy '" + token + "': rand takes no candidate count");
    }
  } else {
    if (colon == std::string::npos) {
      throw SpecError("strategy '" + token + "': missing candidate count, e.g. pow-d:9");
    }
    spec.config.candidate_count = d;
  }
  return spec;
}

namespace {

void check_schema_version(SpecReader& reader) {
  const long long version = reader.get_int("schema_version");
  if (version != 1) reader.fail("unsupported schema_version " + std::to_string(version));
}

std::vector<StrategySpec> parse_strategies(SpecReader& reader, int selected_count,
                                           std::size_t estimate_batch_size) {
  const std::vector<std::string> tokens = reader.get_list("strategies");
  if (tokens.empty()) reader.fail("strategies must list at least one strategy");
  std::vector<StrategySpec> out;
  out.reserve(tokens.size());
  for (const std::string& token : tokens) {
    out.push_back(parse_strategy_token(token, selected_count, estimate_batch_size));
  }
  return out;
}

LrSchedule parse_lr(SpecReader& reader) {
  const std::string kind = reader.get_string_or("lr_schedule", "fixed");
  if (kind == "fixed") {
    return LrSchedule::fixed(reader.get_double("lr"));
  }
  if (kind == "decay") {
    return LrSchedule::decaying(reader.get_double("lr_decay_beta"),
                                reader.get_double("lr_decay_gamma"));
  }
  if (kind == "step") {
    std::vector<int> rounds;
    for (const std::string& item : reader.get_list("lr_halving_rounds")) {
      rounds.push_back(std::stoi(item));
    }
    return LrSchedule::step_decay(reader.get_double("lr"), std::move(rounds));
  }
  reader.fail("lr_schedule must be fixed, decay or step");
}

AvailabilityModel parse_availability(SpecReader& reader) {
  AvailabilityModel model;
  const std::string mode = reader.get_string_or("availability", "always_on");
  if (mode == "always_on") {
    model.mode = AvailabilityModel::Mode::kAlwaysOn;
  } else if (mode == "alternating_groups") {
    model.mode = AvailabilityModel::Mode::kAlternatingGroups;
  } else {
    reader.fail("availability must be always_on or alternating_groups");
  }
  model.exclusion_fraction = reader.get_double_or("availability_exclusion", 0.1);
  if (model.exclusion_fraction < 0.0 || model.exclusion_fraction >= 1.0) {
    reader.fail("availability_exclusion must be in [0, 1)");
  }
  return model;
}

SkewWeighting parse_weighting(SpecReader& reader) {
  const std::string raw = reader.get_string_or("skew_weighting", "simple");
  if (raw == "simple") return SkewWeighting::kUniformMean;
  if (raw == "data") return SkewWeighting::kDataWeighted;
  reader.fail("skew_weighting must be simple or data");
}

}  // namespace

ExperimentSpec ExperimentSpec::load(const std::filesystem::path& path) {
  SpecReader reader(load_flat_spec(path), path.string());
  check_schema_version(reader);

  ExperimentSpec spec;
  spec.base_seed = static_cast<std::uint64_t>(reader.get_int_or("base_seed", 1));
  spec.task = TaskSpec::parse(reader, spec.base_seed);
  const int selected_count = static_cast<int>(reader.get_int("selected_count"));
  spec.batch_size = static_cast<std::size_t>(reader.get_int_or("batch_size", 0));
  const std::size_t estimate_batch = static_cast<std::size_t>(
      reader.get_int_or("estimate_batch_size", static_cast<long long>(spec.batch_size)));
  spec.strategies = parse_strategies(reader, selected_count, estimate_batch);
  spec.rounds = static_cast<int>(reader.get_int("rounds"));
  spec.local_steps = static_cast<int>(reader.get_int("local_steps"));
  spec.lr = parse_lr(reader);
  const std::string agg = reader.get_string_or("aggregation", "simple");
  if (agg == "simple") {
    spec.aggregation = Aggregation::kSimpleMean;
  } else if (agg == "weighted") {
    spec.aggregation = Aggregation::kWeighted;
  } else if (agg == "data") {
    spec.aggregation = Aggregation::kDataWeighted;
  } else {
    reader.fail("aggregation must be simple, weighted or data");
  }
  spec.availability = parse_availability(reader);
  spec.num_seeds = static_cast<int>(reader.get_int_or("seeds", 1));
  if (spec.num_seeds < 1) reader.fail("seeds must be >= 1");
  if (reader.has("target_loss")) spec.target_loss = reader.get_double("target_loss");
  const std::string eval = reader.get_string_or("eval_metric", "none");
  if (eval == "accuracy") {
    spec.eval_accuracy = true;
  } else if (eval != "none") {
    reader.fail("eval_metric must be none or accuracy");
  }
  spec.export_dataset = reader.get_bool_or("export_dataset", false);
  if (spec.export_dataset && spec.task.kind != TaskSpec::Kind::kSynthetic) {
    reader.fail("export_dataset applies to synthetic tasks only");
  }
  reader.finish();

  if (spec.rounds < 1) throw SpecError(path.string() + ": rounds must be >= 1");
  if (spec.local_steps < 1) throw SpecError(path.string() + ": local_steps must be >= 1");
  spec.lr.validate();
  return spec;
}

RunConfig ExperimentSpec::run_config(const StrategySpec& strategy, int seed_index) const {
  RunConfig config;
  config.selection = strategy.config;
  config.local_steps = local_steps;
  config.rounds = rounds;
  config.batch_size = batch_size;
  config.lr = lr;
  config.aggregation = aggregation;
  config.availability = availability;
  config.seed = run_seed(seed_index);
  config.record_eval_metric = eval_accuracy;
  return config;
}

SkewSpec SkewSpec::load(const std::filesystem::path& path) {
  SpecReader reader(load_flat_spec(path), path.string());
  check_schema_version(reader);

  SkewSpec spec;
  spec.base_seed = static_cast<std::uint64_t>(reader.get_int_or("base_seed", 1));
  spec.task = TaskSpec::parse(reader, spec.base_seed);
  const int selected_count = static_cast<int>(reader.get_int("selected_count"));
  const std::size_t estimate_batch =
      static_cast<std::size_t>(reader.get_int_or("estimate_batch_size", 0));
  spec.strategies = parse_strategies(reader, selected_count, estimate_batch);
  spec.draws = static_cast<int>(reader.get_int_or("draws", 10000));
  spec.grid_samples = static_cast<int>(reader.get_int_or("grid_samples", 1000));
  spec.repetitions = static_cast<int>(reader.get_int_or("repetitions", 1));
  spec.weighting = parse_weighting(reader);
  reader.finish();

  if (spec.draws < 1) throw SpecError(path.string() + ": draws must be >= 1");
  if (spec.grid_samples < 1) throw SpecError(path.string() + ": grid_samples must be >= 1");
  if (spec.repetitions < 1) throw SpecError(path.string() + ": repetitions must be >= 1");
  return spec;
}

BoundSpec BoundSpec::load(const std::filesystem::path& path) {
  SpecReader reader(load_flat_spec(path), path.string());
  check_schema_version(reader);

  BoundSpec spec;
  for (const std::string& item : reader.get_list("T_list")) {
    spec.iteration_counts.push_back(std::stod(item));
  }
  if (spec.iteration_counts.empty()) reader.fail("T_list must list at least one value");
  if (reader.has("eta")) spec.eta = reader.get_double("eta");

  const std::string mode = reader.get_string("mode");
  if (mode == "explicit") {
    spec.derive = false;
    spec.inputs.params.L = reader.get_double("L");
    spec.inputs.params.mu = reader.get_double("mu");
    spec.inputs.params.G = reader.get_double("G");
    spec.inputs.params.sigma = reader.get_double_or("sigma", 0.0);
    spec.inputs.params.tau = static_cast<int>(reader.get_int("tau"));
    spec.inputs.params.m = static_cast<int>(reader.get_int("m"));
    spec.inputs.gap = reader.get_double("gap");
    spec.inputs.rho_bar = reader.get_double("rho_bar");
    spec.inputs.rho_tilde = reader.get_double("rho_tilde");
    spec.inputs.initial_sq_dist = reader.get_double("initial_sq_dist");
    spec.inputs.initial_gap = reader.get_double_or("initial_gap", 0.0);
    spec.inputs.validate();
  } else if (mode == "derive") {
    spec.derive = true;
    spec.base_seed = static_cast<std::uint64_t>(reader.get_int_or("base_seed", 1));
    spec.task = TaskSpec::parse(reader, spec.base_seed);
    const int selected_count = static_cast<int>(reader.get_int("selected_count"));
    spec.strategy = parse_strategy_token(reader.get_string("strategy"), selected_count, 0);
    spec.local_steps = static_cast<int>(reader.get_int("local_steps"));
    spec.draws = static_cast<int>(reader.get_int_or("draws", 10000));
    spec.grid_samples = static_cast<int>(reader.get_int_or("grid_samples", 1000));
    spec.derive_rounds = static_cast<int>(reader.get_int_or("derive_rounds", 1000));
    spec.g_slack = reader.get_double_or("g_slack", 1.1);
  } else {
    reader.fail("mode must be explicit or derive");
  }
  reader.finish();
  return spec;
}

}  // namespace fedsel
