#pragma once

#include <vector>

namespace fedsel {

/// Learning-rate schedules. Decaying rates are indexed by the global local-SGD
/// iteration t (eta_t = beta / (t + gamma)); step decay halves the base rate
/// at the listed communication rounds.
struct LrSchedule {
  enum class Kind { kFixed, kDecay, kStepDecay };

  Kind kind = Kind::kFixed;
  double base = 0.0;                // fixed / step-decay base rate
  double decay_beta = 0.0;          // decay numerator
  double decay_gamma = 0.0;         // decay offset
  std::vector<int> halving_rounds;  // step decay milestones (round indices)

  static LrSchedule fixed(double eta);
  static LrSchedule decaying(double beta, double gamma);
  static LrSchedule step_decay(double eta0, std::vector<int> rounds);

  double rate_at(long long iteration, int round) const;
  void validate() const;
};

}  // namespace fedsel
