#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "napc/dataio.hpp"
#include "napc/model.hpp"

namespace napc::train {

struct LossConfig {
  float final_weight = 1.0f;
  float corridor_weight = 1.0f;
};

struct TrainConfig {
  size_t epochs = 30;
  size_t batch_size = 8;
  float lr0 = 0.05f;
  float lr_decay = 0.9f;   // gamma, per epoch
  float dropout_rate = 0.0f;
  uint64_t weights_seed = 1;
  uint64_t training_seed = 1;
  LossConfig loss;
  float clip_norm = 1.0f;  // global gradient norm bound

  void validate() const;
};

/// lr0 * gamma^e.
float lrd_schedule(const TrainConfig& config, size_t epoch);

struct TrainResult {
  nn::Weights weights;
  std::vector<float> loss_history;          // mean per-sequence loss per epoch
  std::vector<uint64_t> epoch_fingerprints; // weights fingerprint after each epoch
  uint64_t fingerprint = 0;                 // == epoch_fingerprints.back()
};

using EpochHook =
    std::function<void(size_t epoch, const nn::Weights&, float mean_loss)>;

// Deterministic minibatch gradient-descent training with BPTT, learning-rate
// decay and gradient-norm clipping. Batch order, dropout masks and weight
// initialization are pure functions of (weights_seed, training_seed), so two
// runs with equal inputs produce bit-identical weights. Throws NumericError
// naming the epoch when the loss turns non-finite.
TrainResult train(const data::Dataset& dataset, const nn::ModelSpec& spec,
                  const TrainConfig& config, const EpochHook& hook = {});

/// Continue a run from a checkpoint taken after `start_epoch` epochs. With the
/// original seeds this replays bit-identically to an uninterrupted run,
/// because every RNG stream is keyed by epoch rather than consumed
/// sequentially.
TrainResult resume(const data::Dataset& dataset, const nn::ModelSpec& spec,
                   const TrainConfig& config, nn::Weights weights,
                   size_t start_epoch, const EpochHook& hook = {});

/// Epoch-keyed shuffle: the batch order permutation for epoch e.
std::vector<size_t> batch_permutation(size_t count, uint64_t training_seed,
                                      size_t epoch);

struct GridSpec {
  size_t group_count = 4;
  std::vector<size_t> group_indices;  // iterated groups; empty = all
  std::vector<std::string> data_amounts = {"small", "large"};
  std::vector<uint64_t> weights_seeds;
  std::vector<uint64_t> training_seeds;
  uint64_t split_seed = 0;
};

struct GridCell {
  size_t group = 0;
  std::string data_amount;  // "small": one group; "large": all but that group
  uint64_t weights_seed = 0;
  uint64_t training_seed = 0;
};

/// Full product in deterministic order: group, data amount, weights seed,
/// training seed.
std::vector<GridCell> grid_cells(const GridSpec& grid);

struct GridCellResult {
  GridCell cell;
  uint64_t fingerprint = 0;
  float final_loss = 0.0f;
  std::vector<double> per_epoch_eval;
  bool failed = false;
  std::string error;
};

using CellEpochEval =
    std::function<double(const GridCell&, size_t epoch, const nn::Weights&)>;

/// One training run per grid cell. Cell failures are recorded and the grid
/// continues. Cells are independent; `jobs` > 1 runs them on a thread pool
/// without changing any result.
std::vector<GridCellResult> grid_search(const data::Dataset& dataset,
                                        const GridSpec& grid,
                                        const nn::ModelSpec& spec,
                                        const TrainConfig& base_config,
                                        const CellEpochEval& eval_hook,
                                        int jobs = 1);

}  // namespace napc::train
