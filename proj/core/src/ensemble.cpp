#include "napc/ensemble.hpp"

#include <algorithm>
#include <cmath>

#include "napc/errors.hpp"

namespace napc::ens {

std::vector<int64_t> quantile_combine(
    const std::vector<std::vector<double>>& member_finals, double tau) {
  const size_t n = member_finals.size();
  if (n == 0) throw DataError("ensemble needs at least one member");
  if (!(tau >= 0.0 && tau <= 1.0)) throw DataError("tau must be in [0, 1]");
  const size_t classes = member_finals.front().size();
  for (const auto& m : member_finals)
    if (m.size() != classes)
      throw DataError("ensemble members disagree on class count");

  // nearest-rank index ceil(tau * N) in [1, N]
  size_t rank = static_cast<size_t>(
      std::ceil(tau * static_cast<double>(n)));
  rank = std::clamp<size_t>(rank, 1, n);

  std::vector<int64_t> out(classes);
  std::vector<double> values(n);
  for (size_t c = 0; c < classes; ++c) {
    for (size_t m = 0; m < n; ++m) values[m] = member_finals[m][c];
    std::nth_element(values.begin(), values.begin() + (rank - 1), values.end());
    out[c] = static_cast<int64_t>(std::round(values[rank - 1]));
  }
  return out;
}

RankedPool rank_members(
    const std::map<std::string, metrics::ErrorPopulation>& population_per_model,
    const metrics::SimulationConfig& sim, const metrics::EquivalenceConfig& eq) {
  if (population_per_model.empty()) throw DataError("model pool is empty");

  // all members must have been evaluated on the same validation set
  const metrics::ErrorPopulation& first = population_per_model.begin()->second;
  for (const auto& [id, pop] : population_per_model) {
    if (pop.sequences.size() != first.sequences.size() ||
        pop.num_classes != first.num_classes)
      throw DataError("model '" + id + "' was evaluated on a different set");
    for (size_t s = 0; s < pop.sequences.size(); ++s)
      if (pop.sequences[s].seq_id != first.sequences[s].seq_id)
        throw DataError("model '" + id + "' was evaluated on a different set");
  }

  RankedPool pool;
  for (const auto& [id, pop] : population_per_model)
    pool.models.push_back({id, metrics::test_success_chance(pop, sim, eq).p_hat});
  std::stable_sort(pool.models.begin(), pool.models.end(),
                   [](const ScoredModel& a, const ScoredModel& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.model_id < b.model_id;
                   });
  return pool;
}

void EnsembleEvalInput::validate() const {
  if (member_finals.empty()) throw DataError("ensemble input has no members");
  if (seq_ids.empty()) throw DataError("ensemble input has no sequences");
  if (manual.size() != seq_ids.size())
    throw DataError("manual labels do not cover every sequence");
  for (const auto& m : member_finals)
    if (m.size() != seq_ids.size())
      throw DataError("a member is missing predictions for some sequences");
}

metrics::ErrorPopulation combine_to_population(const EnsembleEvalInput& input,
                                               double tau) {
  input.validate();
  metrics::ErrorPopulation pop;
  pop.num_classes = input.num_classes;
  std::vector<std::vector<double>> finals(input.member_finals.size());
  for (size_t s = 0; s < input.seq_ids.size(); ++s) {
    for (size_t m = 0; m < input.member_finals.size(); ++m)
      finals[m] = input.member_finals[m][s];
    const std::vector<int64_t> combined = quantile_combine(finals, tau);
    pop.sequences.push_back({input.seq_ids[s], input.manual[s], combined});
  }
  return pop;
}

double calibrate_tau(const EnsembleEvalInput& calibration,
                     std::span<const double> tau_grid,
                     const metrics::SimulationConfig& sim,
                     const metrics::EquivalenceConfig& eq) {
  if (tau_grid.empty()) throw DataError("tau grid is empty");
  std::vector<double> grid(tau_grid.begin(), tau_grid.end());
  std::sort(grid.begin(), grid.end());

  double best_tau = grid.front();
  double best_score = -1.0;
  for (double tau : grid) {
    const metrics::ErrorPopulation pop = combine_to_population(calibration, tau);
    const double score = metrics::test_success_chance(pop, sim, eq).p_hat;
    if (score > best_score) {  // strict: ties keep the smaller tau
      best_score = score;
      best_tau = tau;
    }
  }
  return best_tau;
}

}  // namespace napc::ens
