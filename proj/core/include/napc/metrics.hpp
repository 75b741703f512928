#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace napc::metrics {

struct EvalRecord {
  std::string seq_id;
  size_t class_index = 0;
  int64_t manual_count = 0;     // ground truth, >= 0
  int64_t automatic_count = 0;  // system output
};

// Empirical error distribution grouped by sequence: all classes of one door
// event resample together.
struct ErrorPopulation {
  struct SequenceErrors {
    std::string seq_id;
    std::vector<int64_t> manual;     // per class
    std::vector<int64_t> automatic;  // per class
  };
  size_t num_classes = 0;
  std::vector<SequenceErrors> sequences;

  /// Group flat records by sequence id; every sequence must carry every class.
  static ErrorPopulation from_records(std::span<const EvalRecord> records,
                                      size_t num_classes);
  std::vector<EvalRecord> to_records() const;
};

/// Global relative bias: (sum automatic - sum manual) / sum manual.
double relative_bias(std::span<const EvalRecord> records);

/// Fraction of sequences whose automatic counts equal manual for every class.
double accuracy(const ErrorPopulation& population);

struct EquivalenceConfig {
  double delta = 0.01;      // relative margin
  double confidence = 0.95; // one-sided level per side
  bool pooled = true;       // sum classes per sequence; else all classes must pass
};

struct EquivalenceResult {
  bool pass = false;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double rel_bias = 0.0;  // mean difference over mean manual
  struct PerClass {
    size_t class_index;
    bool pass;
    double ci_lo, ci_hi, rel_bias;
  };
  std::vector<PerClass> per_class;  // filled in per-class mode
};

// Equivalence test on per-sequence differences d_i = automatic - manual:
// CI = (mean d +- t_{confidence, n-1} * s / sqrt(n)) / mean manual, pass iff
// the CI lies strictly inside (-delta, +delta). Pooled mode sums the classes
// of a sequence first; per-class mode requires every class to pass and
// reports the worst class at the top level.
EquivalenceResult equivalence_test(const ErrorPopulation& population,
                                   const EquivalenceConfig& config);

struct SimulationConfig {
  size_t sample_size = 3600;  // n
  size_t repetitions = 10000; // R
  uint64_t seed = 0;
  int jobs = 1;
};

struct SuccessEstimate {
  double p_hat = 0.0;
  size_t passes = 0;
  size_t repetitions = 0;
  size_t degenerate = 0;  // resamples with zero total manual count, counted failed
};

/// Bootstrap estimate of the chance that a size-n validation sample drawn
/// from the population passes the equivalence test. Sequences are drawn with
/// replacement, all classes together; deterministic per seed, reps
/// parallelizable because each repetition owns a derived substream.
SuccessEstimate test_success_chance(const ErrorPopulation& population,
                                    const SimulationConfig& sim,
                                    const EquivalenceConfig& eq);

/// test_success_chance per n with independent sub-seeds.
std::vector<std::pair<size_t, SuccessEstimate>> success_curve(
    const ErrorPopulation& population, std::span<const size_t> n_values,
    const SimulationConfig& sim, const EquivalenceConfig& eq);

}  // namespace napc::metrics
