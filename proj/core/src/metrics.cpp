#include "napc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <thread>

#include "napc/errors.hpp"
#include "napc/rng.hpp"
#include "napc/stats.hpp"

namespace napc::metrics {

ErrorPopulation ErrorPopulation::from_records(std::span<const EvalRecord> records,
                                              size_t num_classes) {
  if (num_classes == 0) throw DataError("population needs at least one class");
  ErrorPopulation pop;
  pop.num_classes = num_classes;
  std::map<std::string, size_t> index;
  std::vector<std::vector<bool>> seen;
  for (const auto& rec : records) {
    if (rec.class_index >= num_classes)
      throw DataError("record for '" + rec.seq_id + "' has class index " +
                      std::to_string(rec.class_index) + " out of range");
    if (rec.manual_count < 0)
      throw DataError("record for '" + rec.seq_id + "' has negative manual count");
    auto [it, inserted] = index.try_emplace(rec.seq_id, pop.sequences.size());
    if (inserted) {
      pop.sequences.push_back({rec.seq_id,
                               std::vector<int64_t>(num_classes, 0),
                               std::vector<int64_t>(num_classes, 0)});
      seen.emplace_back(num_classes, false);
    }
    const size_t s = it->second;
    if (seen[s][rec.class_index])
      throw DataError("duplicate record for '" + rec.seq_id + "' class " +
                      std::to_string(rec.class_index));
    seen[s][rec.class_index] = true;
    pop.sequences[s].manual[rec.class_index] = rec.manual_count;
    pop.sequences[s].automatic[rec.class_index] = rec.automatic_count;
  }
  if (pop.sequences.empty()) throw DataError("population is empty");
  for (size_t s = 0; s < pop.sequences.size(); ++s)
    for (size_t c = 0; c < num_classes; ++c)
      if (!seen[s][c])
        throw DataError("sequence '" + pop.sequences[s].seq_id +
                        "' is missing class " + std::to_string(c));
  return pop;
}

std::vector<EvalRecord> ErrorPopulation::to_records() const {
  std::vector<EvalRecord> out;
  out.reserve(sequences.size() * num_classes);
  for (const auto& s : sequences)
    for (size_t c = 0; c < num_classes; ++c)
      out.push_back({s.seq_id, c, s.manual[c], s.automatic[c]});
  return out;
}

double relative_bias(std::span<const EvalRecord> records) {
  int64_t sum_manual = 0, sum_auto = 0;
  for (const auto& r : records) {
    sum_manual += r.manual_count;
    sum_auto += r.automatic_count;
  }
  if (sum_manual == 0)
    throw DataError("relative bias undefined: total manual count is zero");
  return static_cast<double>(sum_auto - sum_manual) /
         static_cast<double>(sum_manual);
}

double accuracy(const ErrorPopulation& population) {
  if (population.sequences.empty()) throw DataError("population is empty");
  size_t exact = 0;
  for (const auto& s : population.sequences)
    if (s.manual == s.automatic) ++exact;
  return static_cast<double>(exact) /
         static_cast<double>(population.sequences.size());
}

namespace {

struct Interval {
  double lo, hi, rel_bias;
  bool pass;
};

/// t-interval for the mean difference, normalized by the mean manual count.
/// nullopt when the resample is degenerate (zero total manual count).
std::optional<Interval> t_interval(double sum_d, double sum_d2, double sum_m,
                                   size_t n, double t_quant, double delta) {
  if (sum_m <= 0.0) return std::nullopt;
  const double nd = static_cast<double>(n);
  const double d_bar = sum_d / nd;
  const double m_bar = sum_m / nd;
  double var = (sum_d2 - nd * d_bar * d_bar) / (nd - 1.0);
  if (var < 0.0) var = 0.0;  // guard tiny negative from cancellation
  const double half = t_quant * std::sqrt(var / nd);
  Interval iv;
  iv.lo = (d_bar - half) / m_bar;
  iv.hi = (d_bar + half) / m_bar;
  iv.rel_bias = d_bar / m_bar;
  iv.pass = iv.lo > -delta && iv.hi < delta;
  return iv;
}

}  // namespace

EquivalenceResult equivalence_test(const ErrorPopulation& population,
                                   const EquivalenceConfig& config) {
  const size_t n = population.sequences.size();
  if (n < 2) throw DataError("equivalence test needs n >= 2");
  if (!(config.delta > 0 && config.delta < 1))
    throw DataError("delta must be in (0, 1)");
  const double t_quant =
      stats::student_t_quantile(config.confidence, static_cast<double>(n - 1));

  EquivalenceResult result;
  if (config.pooled) {
    double sum_d = 0, sum_d2 = 0, sum_m = 0;
    for (const auto& s : population.sequences) {
      double d = 0, m = 0;
      for (size_t c = 0; c < population.num_classes; ++c) {
        d += static_cast<double>(s.automatic[c] - s.manual[c]);
        m += static_cast<double>(s.manual[c]);
      }
      sum_d += d;
      sum_d2 += d * d;
      sum_m += m;
    }
    const auto iv = t_interval(sum_d, sum_d2, sum_m, n, t_quant, config.delta);
    if (!iv) throw DataError("equivalence test undefined: mean manual count is zero");
    result.pass = iv->pass;
    result.ci_lo = iv->lo;
    result.ci_hi = iv->hi;
    result.rel_bias = iv->rel_bias;
    return result;
  }

  result.pass = true;
  double worst = -1.0;
  for (size_t c = 0; c < population.num_classes; ++c) {
    double sum_d = 0, sum_d2 = 0, sum_m = 0;
    for (const auto& s : population.sequences) {
      const double d = static_cast<double>(s.automatic[c] - s.manual[c]);
      sum_d += d;
      sum_d2 += d * d;
      sum_m += static_cast<double>(s.manual[c]);
    }
    const auto iv = t_interval(sum_d, sum_d2, sum_m, n, t_quant, config.delta);
    if (!iv)
      throw DataError("equivalence test undefined: class " + std::to_string(c) +
                      " has zero mean manual count");
    result.per_class.push_back({c, iv->pass, iv->lo, iv->hi, iv->rel_bias});
    result.pass = result.pass && iv->pass;
    const double extent = std::max(std::abs(iv->lo), std::abs(iv->hi));
    if (extent > worst) {
      worst = extent;
      result.ci_lo = iv->lo;
      result.ci_hi = iv->hi;
      result.rel_bias = iv->rel_bias;
    }
  }
  return result;
}

namespace {

struct PooledSample {
  std::vector<double> d;  // per sequence, classes summed
  std::vector<double> m;
};

struct PerClassSample {
  size_t classes;
  std::vector<double> d;  // seq-major, class-minor
  std::vector<double> m;
};

}  // namespace

SuccessEstimate test_success_chance(const ErrorPopulation& population,
                                    const SimulationConfig& sim,
                                    const EquivalenceConfig& eq) {
  if (population.sequences.empty()) throw DataError("population is empty");
  if (sim.sample_size < 2) throw DataError("sample size must be >= 2");
  if (sim.repetitions < 1) throw DataError("repetitions must be >= 1");
  if (!(eq.delta > 0 && eq.delta < 1)) throw DataError("delta must be in (0, 1)");

  const size_t pop_n = population.sequences.size();
  const size_t n = sim.sample_size;
  const size_t classes = population.num_classes;
  const double t_quant =
      stats::student_t_quantile(eq.confidence, static_cast<double>(n - 1));

  PooledSample pooled;
  PerClassSample per_class{classes, {}, {}};
  if (eq.pooled) {
    pooled.d.resize(pop_n);
    pooled.m.resize(pop_n);
    for (size_t s = 0; s < pop_n; ++s) {
      double d = 0, m = 0;
      for (size_t c = 0; c < classes; ++c) {
        d += static_cast<double>(population.sequences[s].automatic[c] -
                                 population.sequences[s].manual[c]);
        m += static_cast<double>(population.sequences[s].manual[c]);
      }
      pooled.d[s] = d;
      pooled.m[s] = m;
    }
  } else {
    per_class.d.resize(pop_n * classes);
    per_class.m.resize(pop_n * classes);
    for (size_t s = 0; s < pop_n; ++s)
      for (size_t c = 0; c < classes; ++c) {
        per_class.d[s * classes + c] =
            static_cast<double>(population.sequences[s].automatic[c] -
                                population.sequences[s].manual[c]);
        per_class.m[s * classes + c] =
            static_cast<double>(population.sequences[s].manual[c]);
      }
  }

  auto run_rep = [&](size_t rep) -> int {
    // returns 1 = pass, 0 = fail, -1 = degenerate (counted failed)
    Rng rng = Rng::stream("bootstrap", sim.seed, {rep});
    if (eq.pooled) {
      double sum_d = 0, sum_d2 = 0, sum_m = 0;
      for (size_t k = 0; k < n; ++k) {
        const size_t idx = static_cast<size_t>(rng.next_below(pop_n));
        const double d = pooled.d[idx];
        sum_d += d;
        sum_d2 += d * d;
        sum_m += pooled.m[idx];
      }
      const auto iv = t_interval(sum_d, sum_d2, sum_m, n, t_quant, eq.delta);
      if (!iv) return -1;
      return iv->pass ? 1 : 0;
    }
    std::vector<double> sum_d(classes, 0), sum_d2(classes, 0), sum_m(classes, 0);
    for (size_t k = 0; k < n; ++k) {
      const size_t idx = static_cast<size_t>(rng.next_below(pop_n));
      for (size_t c = 0; c < classes; ++c) {
        const double d = per_class.d[idx * classes + c];
        sum_d[c] += d;
        sum_d2[c] += d * d;
        sum_m[c] += per_class.m[idx * classes + c];
      }
    }
    bool all_pass = true;
    for (size_t c = 0; c < classes; ++c) {
      const auto iv = t_interval(sum_d[c], sum_d2[c], sum_m[c], n, t_quant, eq.delta);
      if (!iv) return -1;
      all_pass = all_pass && iv->pass;
    }
    return all_pass ? 1 : 0;
  };

  SuccessEstimate est;
  est.repetitions = sim.repetitions;
  const int jobs = std::max(1, sim.jobs);
  if (jobs == 1) {
    for (size_t r = 0; r < sim.repetitions; ++r) {
      const int v = run_rep(r);
      if (v == 1) ++est.passes;
      if (v == -1) ++est.degenerate;
    }
  } else {
    std::vector<size_t> passes(jobs, 0), degenerate(jobs, 0);
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) {
      pool.emplace_back([&, j] {
        for (size_t r = j; r < sim.repetitions; r += jobs) {
          const int v = run_rep(r);
          if (v == 1) ++passes[j];
          if (v == -1) ++degenerate[j];
        }
      });
    }
    for (auto& t : pool) t.join();
    for (int j = 0; j < jobs; ++j) {
      est.passes += passes[j];
      est.degenerate += degenerate[j];
    }
  }
  est.p_hat = static_cast<double>(est.passes) /
              static_cast<double>(sim.repetitions);
  return est;
}

std::vector<std::pair<size_t, SuccessEstimate>> success_curve(
    const ErrorPopulation& population, std::span<const size_t> n_values,
    const SimulationConfig& sim, const EquivalenceConfig& eq) {
  if (n_values.empty()) throw DataError("n grid is empty");
  std::vector<std::pair<size_t, SuccessEstimate>> curve;
  curve.reserve(n_values.size());
  for (size_t n : n_values) {
    SimulationConfig sub = sim;
    sub.sample_size = n;
    sub.seed = Rng::stream("curve", sim.seed, {n}).next_u64();
    curve.emplace_back(n, test_success_chance(population, sub, eq));
  }
  return curve;
}

}  // namespace napc::metrics
