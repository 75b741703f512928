#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "napc/metrics.hpp"

namespace napc::ens {

/// Default calibration grid, covering the 50%, 5/9 and 2/3 quantile choices.
inline const std::vector<double> kDefaultTauGrid = {0.5,     5.0 / 9.0, 0.6,
                                                    2.0 / 3.0, 0.7,     0.75};

// Per-class nearest-rank quantile over member final counts: order statistic
// at index ceil(tau * N), clamped to [1, N], then rounded half away from
// zero. Members enter unrounded; the output is always one of the member
// values rounded once.
std::vector<int64_t> quantile_combine(
    const std::vector<std::vector<double>>& member_finals, double tau);

struct ScoredModel {
  std::string model_id;
  double score = 0.0;  // test success chance
};

// A pool of independently evaluated models sorted by their probability of
// passing the equivalence test, best first (ties broken by model id).
struct RankedPool {
  std::vector<ScoredModel> models;
};

/// Score = test_success_chance of each model's population on the shared
/// validation set. All populations must cover the same sequences.
RankedPool rank_members(
    const std::map<std::string, metrics::ErrorPopulation>& population_per_model,
    const metrics::SimulationConfig& sim, const metrics::EquivalenceConfig& eq);

// Member predictions on a common sequence set, used to evaluate and calibrate
// an ensemble: manual labels per sequence plus each member's unrounded final
// counts.
struct EnsembleEvalInput {
  std::vector<std::string> seq_ids;
  size_t num_classes = 0;
  std::vector<std::vector<int64_t>> manual;              // [seq][class]
  std::vector<std::vector<std::vector<double>>> member_finals;  // [member][seq][class]

  void validate() const;
};

/// Combine member finals at quantile tau into an error population.
metrics::ErrorPopulation combine_to_population(const EnsembleEvalInput& input,
                                               double tau);

/// tau* = argmax over the grid of the ensemble's test success chance on the
/// calibration population; ties resolve to the smallest tau.
double calibrate_tau(const EnsembleEvalInput& calibration,
                     std::span<const double> tau_grid,
                     const metrics::SimulationConfig& sim,
                     const metrics::EquivalenceConfig& eq);

}  // namespace napc::ens
