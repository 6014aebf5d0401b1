#include "fedsel/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "fedsel/quadratic.hpp"  // sample_power_law

namespace fedsel {
namespace {

constexpr int kF = kSyntheticFeatureDim;
constexpr int kC = kSyntheticClasses;

void check_classifier_dimension(const ParamVector& w) {
  if (static_cast<int>(w.size()) != kC * kF + kC) {
    throw std::invalid_argument("logistic task: parameter dimension " + std::to_string(w.size()) +
                                " != " + std::to_string(kC * kF + kC));
  }
}

// Softmax probabilities for one sample; max-shifted for stability.
void softmax_probs(const ParamVector& w, const ParamVector& x, double* probs) {
  double max_logit = -1e300;
  for (int c = 0; c < kC; ++c) {
    double z = w[static_cast<std::size_t>(kC * kF + c)];
    const double* row = w.data() + static_cast<std::size_t>(c) * kF;
    for (int j = 0; j < kF; ++j) z += row[j] * x[static_cast<std::size_t>(j)];
    probs[c] = z;
    max_logit = std::max(max_logit, z);
  }
  double sum = 0.0;
  for (int c = 0; c < kC; ++c) {
    probs[c] = std::exp(probs[c] - max_logit);
    sum += probs[c];
  }
  for (int c = 0; c < kC; ++c) probs[c] /= sum;
}

double sample_cross_entropy(const ParamVector& w, const ParamVector& x, int y) {
  double probs[kC];
  softmax_probs(w, x, probs);
  return -std::log(std::max(probs[y], 1e-300));
}

// Adds this sample's cross-entropy gradient, scaled by `weight`, into `grad`.
void accumulate_gradient(const ParamVector& w, const ParamVector& x, int y, double weight,
                         ParamVector& grad) {
  double probs[kC];
  softmax_probs(w, x, probs);
  for (int c = 0; c < kC; ++c) {
    const double coeff = weight * (probs[c] - (c == y ? 1.0 : 0.0));
    double* row = grad.data() + static_cast<std::size_t>(c) * kF;
    for (int j = 0; j < kF; ++j) row[j] += coeff * x[static_cast<std::size_t>(j)];
    grad[static_cast<std::size_t>(kC * kF + c)] += coeff;
  }
}

// Uniform sample of `batch` distinct indices from [0, n) (partial
// Fisher-Yates). Callers guarantee batch < n.
std::vector<std::size_t> sample_batch_indices(std::size_t n, std::size_t batch, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < batch; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(batch);
  return idx;
}

}  // namespace

std::size_t SyntheticDataset::total_samples() const {
  std::size_t total = 0;
  for (const Client& c : clients) total += c.size();
  return total;
}

void SyntheticDataset::validate() const {
  if (clients.empty()) throw std::invalid_argument("synthetic dataset: no clients");
  if (p.size() != client_count()) {
    throw std::invalid_argument("synthetic dataset: fraction/client count mismatch");
  }
  p.validate();
  for (const Client& c : clients) {
    if (c.size() == 0) throw std::invalid_argument("synthetic dataset: empty client");
    if (c.features.size() != c.labels.size()) {
      throw std::invalid_argument("synthetic dataset: feature/label count mismatch");
    }
    for (int y : c.labels) {
      if (y < 0 || y >= kC) throw std::invalid_argument("synthetic dataset: label out of range");
    }
    for (const ParamVector& x : c.features) {
      if (static_cast<int>(x.size()) != kF) {
        throw std::invalid_argument("synthetic dataset: feature dimension mismatch");
      }
      if (!vec::all_finite(x)) throw std::invalid_argument("synthetic dataset: non-finite feature");
    }
  }
}

SyntheticDataset generate_synthetic(double alpha, double beta, int clients, double power_law_a,
                                    std::uint64_t seed, std::size_t min_samples,
                                    std::size_t size_scale) {
  if (clients < 1) throw std::invalid_argument("generate_synthetic: clients must be >= 1");
  if (!(alpha >= 0.0) || !(beta >= 0.0)) {
    throw std::invalid_argument("generate_synthetic: alpha and beta must be nonnegative");
  }
  if (!(power_law_a > 0.0)) {
    throw std::invalid_argument("generate_synthetic: power_law_a must be positive");
  }
  if (min_samples < 1) throw std::invalid_argument("generate_synthetic: min_samples must be >= 1");

  SyntheticDataset data;
  data.alpha = alpha;
  data.beta = beta;
  data.power_law_a = power_law_a;
  data.seed = seed;

  Rng size_rng = make_stream(seed, {0});
  const std::vector<double> size_draws = sample_power_law(clients, power_law_a, size_rng);

  std::normal_distribution<double> standard_normal(0.0, 1.0);
  // Diagonal feature covariance, decaying across coordinates.
  std::vector<double> feature_scale(kF);
  for (int j = 0; j < kF; ++j) feature_scale[static_cast<std::size_t>(j)] = std::pow(j + 1.0, -0.6);

  std::vector<double> raw_sizes(static_cast<std::size_t>(clients));
  data.clients.resize(static_cast<std::size_t>(clients));
  data.model_means.resize(static_cast<std::size_t>(clients));
  data.feature_mean_offsets.resize(static_cast<std::size_t>(clients));

  for (int k = 0; k < clients; ++k) {
    const std::size_t D =
        min_samples + static_cast<std::size_t>(std::floor(static_cast<double>(size_scale) *
                                                          size_draws[static_cast<std::size_t>(k)]));

    Rng model_rng = make_stream(seed, {1, static_cast<std::uint64_t>(k)});
    Rng sample_rng = make_stream(seed, {2, static_cast<std::uint64_t>(k)});

    const double u_k = std::sqrt(alpha) * standard_normal(model_rng);
    const double B_k = std::sqrt(beta) * standard_normal(model_rng);
    data.model_means[static_cast<std::size_t>(k)] = u_k;
    data.feature_mean_offsets[static_cast<std::size_t>(k)] = B_k;

    // Ground-truth classifier for this client.
    std::vector<double> truth(static_cast<std::size_t>(kC * kF + kC));
    for (double& t : truth) t = u_k + standard_normal(model_rng);
    // Per-coordinate feature means.
    std::vector<double> v_k(kF);
    for (double& v : v_k) v = B_k + standard_normal(model_rng);

    SyntheticDataset::Client& client = data.clients[static_cast<std::size_t>(k)];
    client.features.resize(D);
    client.labels.resize(D);
    for (std::size_t s = 0; s < D; ++s) {
      ParamVector x(kF);
      for (int j = 0; j < kF; ++j) {
        x[static_cast<std::size_t>(j)] =
            v_k[static_cast<std::size_t>(j)] +
            feature_scale[static_cast<std::size_t>(j)] * standard_normal(sample_rng);
      }
      int best = 0;
      double best_logit = -1e300;
      for (int c = 0; c < kC; ++c) {
        double z = truth[static_cast<std::size_t>(kC * kF + c)];
        for (int j = 0; j < kF; ++j) {
          z += truth[static_cast<std::size_t>(c) * kF + static_cast<std::size_t>(j)] *
               x[static_cast<std::size_t>(j)];
        }
        if (z > best_logit) {
          best_logit = z;
          best = c;
        }
      }
      client.features[s] = std::move(x);
      client.labels[s] = best;
    }
    raw_sizes[static_cast<std::size_t>(k)] = static_cast<double>(D);
  }

  data.p = DataFractions::normalized(std::move(raw_sizes));
  data.validate();
  return data;
}

void export_dataset(const SyntheticDataset& data, std::ostream& out) {
  char buffer[64];
  out << "# fedsel-synthetic version=1 alpha=" << data.alpha << " beta=" << data.beta
      << " power_law_a=" << data.power_law_a << " seed=" << data.seed
      << " clients=" << data.client_count() << "\n";
  for (int k = 0; k < data.client_count(); ++k) {
    const SyntheticDataset::Client& c = data.clients[static_cast<std::size_t>(k)];
    for (std::size_t s = 0; s < c.size(); ++s) {
      out << k << ' ' << c.labels[s];
      for (double f : c.features[s]) {
        std::snprintf(buffer, sizeof buffer, "%.17g", f);
        out << ' ' << buffer;
      }
      out << '\n';
    }
  }
}

SyntheticDataset import_dataset(std::istream& in) {
  SyntheticDataset data;
  std::string line;
  std::vector<double> raw_sizes;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream header(line);
      std::string token;
      while (header >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = token.substr(0, eq);
        const std::string value = token.substr(eq + 1);
        if (key == "alpha") data.alpha = std::stod(value);
        else if (key == "beta") data.beta = std::stod(value);
        else if (key == "power_law_a") data.power_law_a = std::stod(value);
        else if (key == "seed") data.seed = std::stoull(value);
      }
      continue;
    }
    std::istringstream row(line);
    int client = 0;
    int label = 0;
    if (!(row >> client >> label)) {
      throw std::runtime_error("import_dataset: malformed record: " + line);
    }
    if (client < 0) throw std::runtime_error("import_dataset: negative client id");
    ParamVector x;
    x.reserve(kF);
    double f = 0.0;
    while (row >> f) x.push_back(f);
    if (static_cast<int>(x.size()) != kF) {
      throw std::runtime_error("import_dataset: expected " + std::to_string(kF) +
                               " features, got " + std::to_string(x.size()));
    }
    if (static_cast<std::size_t>(client) >= data.clients.size()) {
      data.clients.resize(static_cast<std::size_t>(client) + 1);
    }
    data.clients[static_cast<std::size_t>(client)].features.push_back(std::move(x));
    data.clients[static_cast<std::size_t>(client)].labels.push_back(label);
  }
  raw_sizes.reserve(data.clients.size());
  for (const SyntheticDataset::Client& c : data.clients) {
    raw_sizes.push_back(static_cast<double>(c.size()));
  }
  if (raw_sizes.empty()) throw std::runtime_error("import_dataset: no records");
  data.p = DataFractions::normalized(std::move(raw_sizes));
  data.validate();
  return data;
}

SyntheticLogisticTask::SyntheticLogisticTask(std::shared_ptr<const SyntheticDataset> data,
                                             double l2)
    : data_(std::move(data)), l2_(l2) {
  if (!data_) throw std::invalid_argument("logistic task: null dataset");
  data_->validate();
  if (!(l2_ >= 0.0)) throw std::invalid_argument("logistic task: l2 must be nonnegative");
}

double SyntheticLogisticTask::loss(int k, const ParamVector& w) const {
  check_classifier_dimension(w);
  const SyntheticDataset::Client& c = data_->clients[static_cast<std::size_t>(k)];
  double total = 0.0;
  for (std::size_t s = 0; s < c.size(); ++s) {
    total += sample_cross_entropy(w, c.features[s], c.labels[s]);
  }
  double value = total / static_cast<double>(c.size());
  if (l2_ > 0.0) value += 0.5 * l2_ * vec::squared_norm(w);
  return value;
}

ParamVector SyntheticLogisticTask::gradient(int k, const ParamVector& w) const {
  check_classifier_dimension(w);
  const SyntheticDataset::Client& c = data_->clients[static_cast<std::size_t>(k)];
  ParamVector grad = vec::zeros(w.size());
  const double weight = 1.0 / static_cast<double>(c.size());
  for (std::size_t s = 0; s < c.size(); ++s) {
    accumulate_gradient(w, c.features[s], c.labels[s], weight, grad);
  }
  if (l2_ > 0.0) vec::axpy(l2_, w, grad);
  return grad;
}

double SyntheticLogisticTask::estimate_loss(int k, const ParamVector& w, std::size_t batch,
                                            Rng& rng) const {
  check_classifier_dimension(w);
  const SyntheticDataset::Client& c = data_->clients[static_cast<std::size_t>(k)];
  if (batch == 0 || batch >= c.size()) return loss(k, w);
  const std::vector<std::size_t> idx = sample_batch_indices(c.size(), batch, rng);
  double total = 0.0;
  for (std::size_t s : idx) total += sample_cross_entropy(w, c.features[s], c.labels[s]);
  double value = total / static_cast<double>(batch);
  if (l2_ > 0.0) value += 0.5 * l2_ * vec::squared_norm(w);
  return value;
}

StochasticGradientResult SyntheticLogisticTask::stochastic_gradient(int k, const ParamVector& w,
                                                                    std::size_t batch,
                                                                    Rng& rng) const {
  check_classifier_dimension(w);
  const SyntheticDataset::Client& c = data_->clients[static_cast<std::size_t>(k)];
  if (batch == 0 || batch >= c.size()) {
    return {gradient(k, w), loss(k, w)};
  }
  const std::vector<std::size_t> idx = sample_batch_indices(c.size(), batch, rng);
  ParamVector grad = vec::zeros(w.size());
  const double weight = 1.0 / static_cast<double>(batch);
  double total = 0.0;
  for (std::size_t s : idx) {
    total += sample_cross_entropy(w, c.features[s], c.labels[s]);
    accumulate_gradient(w, c.features[s], c.labels[s], weight, grad);
  }
  double value = total / static_cast<double>(batch);
  if (l2_ > 0.0) {
    vec::axpy(l2_, w, grad);
    value += 0.5 * l2_ * vec::squared_norm(w);
  }
  return {std::move(grad), value};
}

double SyntheticLogisticTask::eval_metric(const ParamVector& w) const {
  check_classifier_dimension(w);
  std::size_t correct = 0;
  std::size_t total = 0;
  double probs[kC];
  for (const SyntheticDataset::Client& c : data_->clients) {
    for (std::size_t s = 0; s < c.size(); ++s) {
      softmax_probs(w, c.features[s], probs);
      const int pred =
          static_cast<int>(std::max_element(probs, probs + kC) - probs);
      correct += (pred == c.labels[s]) ? 1 : 0;
      ++total;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace fedsel
