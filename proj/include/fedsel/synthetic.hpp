#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "fedsel/task.hpp"

namespace fedsel {

inline constexpr int kSyntheticFeatureDim = 60;
inline constexpr int kSyntheticClasses = 10;

/// Heterogeneous multi-class classification data. Per client k the generator
/// draws a ground-truth softmax model with entries N(u_k, 1), u_k ~ N(0, alpha),
/// and features x ~ N(v_k, Sigma) with Sigma_jj = j^(-1.2), v_k entries
/// ~ N(B_k, 1), B_k ~ N(0, beta); labels are the ground-truth argmax class.
/// alpha controls model heterogeneity, beta feature heterogeneity.
struct SyntheticDataset {
  struct Client {
    std::vector<ParamVector> features;  // D_k rows of dimension kSyntheticFeatureDim
    std::vector<int> labels;            // in [0, kSyntheticClasses)
    std::size_t size() const { return labels.size(); }
  };

  std::vector<Client> clients;
  DataFractions p;  // D_k / sum D

  // Generator parameters and per-client ground-truth means (u_k, B_k), kept
  // for inspection.
  double alpha = 0.0;
  double beta = 0.0;
  double power_law_a = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> model_means;
  std::vector<double> feature_mean_offsets;

  int client_count() const { return static_cast<int>(clients.size()); }
  std::size_t total_samples() const;
  void validate() const;
};

/// Client dataset sizes follow D_k = min_samples + floor(size_scale * x_k)
/// with x_k drawn from the power law a x^(a-1) on (0,1], so every client can
/// serve at least one standard mini-batch. Exponents a < 1 give the skewed
/// profile of real federated populations (a few large clients, many small).
SyntheticDataset generate_synthetic(double alpha, double beta, int clients, double power_law_a,
                                    std::uint64_t seed, std::size_t min_samples = 50,
                                    std::size_t size_scale = 450);

/// Line-delimited text export, one sample per line:
///   <client id> <label> <f_1> ... <f_60>
/// preceded by one '#' header line carrying the generator parameters.
void export_dataset(const SyntheticDataset& data, std::ostream& out);
SyntheticDataset import_dataset(std::istream& in);

/// Multinomial logistic regression (softmax cross-entropy) over a
/// SyntheticDataset. Parameter layout: class-major weight matrix
/// (kSyntheticClasses x kSyntheticFeatureDim, row major) followed by the
/// kSyntheticClasses bias entries.
///
/// An optional L2 penalty (l2/2)||w||^2 can be added uniformly to every F_k
/// (and therefore to F); a small positive value makes the minimizers unique.
class SyntheticLogisticTask final : public Task {
 public:
  explicit SyntheticLogisticTask(std::shared_ptr<const SyntheticDataset> data, double l2 = 0.0);

  int client_count() const override { return data_->client_count(); }
  int dimension() const override {
    return kSyntheticClasses * kSyntheticFeatureDim + kSyntheticClasses;
  }
  const DataFractions& fractions() const override { return data_->p; }
  std::size_t data_size(int k) const override { return data_->clients[static_cast<std::size_t>(k)].size(); }

  double loss(int k, const ParamVector& w) const override;
  ParamVector gradient(int k, const ParamVector& w) const override;
  double estimate_loss(int k, const ParamVector& w, std::size_t batch, Rng& rng) const override;
  StochasticGradientResult stochastic_gradient(int k, const ParamVector& w, std::size_t batch,
                                               Rng& rng) const override;

  /// Training accuracy over the pooled samples.
  double eval_metric(const ParamVector& w) const override;

  double l2() const { return l2_; }
  const SyntheticDataset& data() const { return *data_; }

 private:
  std::shared_ptr<const SyntheticDataset> data_;
  double l2_ = 0.0;
};

}  // namespace fedsel
