#include "napc/trainer.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "napc/bptt.hpp"
#include "napc/rng.hpp"

namespace napc::train {

void TrainConfig::validate() const {
  if (epochs < 1) throw DataError("epochs must be >= 1");
  if (batch_size < 1) throw DataError("batch_size must be >= 1");
  if (!(lr0 > 0)) throw DataError("lr0 must be > 0");
  if (!(lr_decay > 0 && lr_decay <= 1)) throw DataError("lr_decay must be in (0, 1]");
  if (!(dropout_rate >= 0 && dropout_rate < 1))
    throw DataError("dropout_rate must be in [0, 1)");
  if (!(clip_norm > 0)) throw DataError("clip_norm must be > 0");
}

float lrd_schedule(const TrainConfig& config, size_t epoch) {
  return static_cast<float>(
      static_cast<double>(config.lr0) *
      std::pow(static_cast<double>(config.lr_decay), static_cast<double>(epoch)));
}

std::vector<size_t> batch_permutation(size_t count, uint64_t training_seed,
                                      size_t epoch) {
  std::vector<size_t> order(count);
  for (size_t i = 0; i < count; ++i) order[i] = i;
  Rng rng = Rng::stream("shuffle", training_seed, {epoch});
  for (size_t i = count; i > 1; --i) {
    const size_t j = static_cast<size_t>(rng.next_below(i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

namespace {

/// One mask per LSTM layer, resampled per (epoch, batch, slot). Draw order is
/// slot-major, then layer, then unit, all from the batch's dropout stream.
std::vector<std::vector<float>> draw_masks(Rng& rng, size_t layers, size_t units,
                                           float rate) {
  std::vector<std::vector<float>> masks(layers, std::vector<float>(units, 1.0f));
  const float keep_scale = 1.0f / (1.0f - rate);
  for (size_t l = 0; l < layers; ++l)
    for (size_t j = 0; j < units; ++j)
      masks[l][j] = rng.next_double() >= rate ? keep_scale : 0.0f;
  return masks;
}

void run_epochs(const data::Dataset& dataset, const nn::ModelSpec& spec,
                const TrainConfig& config, nn::Weights& weights,
                size_t first_epoch, TrainResult& result, const EpochHook& hook) {
  const size_t n = dataset.sequences.size();
  nn::WeightsT<float> grad = nn::make_weights<float>(spec);

  std::vector<std::vector<float>*> wtensors, gtensors;
  weights.for_each_param([&](std::vector<float>& v) { wtensors.push_back(&v); });
  grad.for_each_param([&](std::vector<float>& v) { gtensors.push_back(&v); });

  for (size_t e = first_epoch; e < config.epochs; ++e) {
    const float lr = lrd_schedule(config, e);
    const std::vector<size_t> order =
        batch_permutation(n, config.training_seed, e);

    double epoch_loss = 0.0;
    size_t batch_index = 0;
    for (size_t start = 0; start < n; start += config.batch_size, ++batch_index) {
      const size_t end = std::min(start + config.batch_size, n);
      const size_t batch_n = end - start;

      grad.for_each_param([](std::vector<float>& v) {
        std::fill(v.begin(), v.end(), 0.0f);
      });

      Rng drop_rng =
          Rng::stream("dropout", config.training_seed, {e, batch_index});
      for (size_t s = start; s < end; ++s) {
        std::vector<std::vector<float>> masks;
        if (config.dropout_rate > 0)
          masks = draw_masks(drop_rng, spec.lstm_layers, spec.lstm_units,
                             config.dropout_rate);
        const data::Sequence& seq = dataset.sequences[order[s]];
        epoch_loss += static_cast<double>(
            bptt_sequence<float>(spec, weights, seq, masks, config.loss, grad));
      }

      const float inv_batch = 1.0f / static_cast<float>(batch_n);
      double sq_norm = 0.0;
      for (auto* gv : gtensors) {
        for (float& g : *gv) {
          g *= inv_batch;
          sq_norm += static_cast<double>(g) * static_cast<double>(g);
        }
      }
      const double norm = std::sqrt(sq_norm);
      const float rescale =
          norm > config.clip_norm
              ? static_cast<float>(static_cast<double>(config.clip_norm) / norm)
              : 1.0f;
      const float step = lr * rescale;
      for (size_t p = 0; p < wtensors.size(); ++p) {
        std::vector<float>& wv = *wtensors[p];
        const std::vector<float>& gv = *gtensors[p];
        for (size_t k = 0; k < wv.size(); ++k) wv[k] -= step * gv[k];
      }
    }

    const float mean_loss = static_cast<float>(epoch_loss / static_cast<double>(n));
    if (!std::isfinite(mean_loss))
      throw NumericError("training diverged at epoch " + std::to_string(e));
    result.loss_history.push_back(mean_loss);
    result.epoch_fingerprints.push_back(nn::weights_fingerprint(weights));
    if (hook) hook(e, weights, mean_loss);
  }
  result.weights = weights;
  result.fingerprint = result.epoch_fingerprints.back();
}

}  // namespace

TrainResult train(const data::Dataset& dataset, const nn::ModelSpec& spec,
                  const TrainConfig& config, const EpochHook& hook) {
  config.validate();
  spec.validate();
  if (dataset.sequences.empty()) throw DataError("training dataset is empty");
  nn::Weights weights = nn::init_weights(spec, config.weights_seed);
  TrainResult result;
  run_epochs(dataset, spec, config, weights, 0, result, hook);
  return result;
}

TrainResult resume(const data::Dataset& dataset, const nn::ModelSpec& spec,
                   const TrainConfig& config, nn::Weights weights,
                   size_t start_epoch, const EpochHook& hook) {
  config.validate();
  spec.validate();
  if (dataset.sequences.empty()) throw DataError("training dataset is empty");
  if (start_epoch >= config.epochs)
    throw DataError("resume epoch is past the configured epoch count");
  TrainResult result;
  run_epochs(dataset, spec, config, weights, start_epoch, result, hook);
  return result;
}

std::vector<GridCell> grid_cells(const GridSpec& grid) {
  if (grid.group_count < 1 || grid.data_amounts.empty() ||
      grid.weights_seeds.empty() || grid.training_seeds.empty())
    throw DataError("grid spec has an empty axis");
  std::vector<size_t> groups = grid.group_indices;
  if (groups.empty())
    for (size_t g = 0; g < grid.group_count; ++g) groups.push_back(g);
  for (size_t g : groups)
    if (g >= grid.group_count)
      throw DataError("grid group index out of range");
  std::vector<GridCell> cells;
  for (size_t g : groups)
    for (const auto& amount : grid.data_amounts)
      for (uint64_t ws : grid.weights_seeds)
        for (uint64_t ts : grid.training_seeds)
          cells.push_back({g, amount, ws, ts});
  return cells;
}

std::vector<GridCellResult> grid_search(const data::Dataset& dataset,
                                        const GridSpec& grid,
                                        const nn::ModelSpec& spec,
                                        const TrainConfig& base_config,
                                        const CellEpochEval& eval_hook,
                                        int jobs) {
  const std::vector<data::Dataset> groups =
      data::split_groups(dataset, grid.group_count, grid.split_seed);
  const std::vector<GridCell> cells = grid_cells(grid);
  std::vector<GridCellResult> results(cells.size());

  auto run_cell = [&](size_t idx) {
    const GridCell& cell = cells[idx];
    GridCellResult& res = results[idx];
    res.cell = cell;
    try {
      data::Dataset train_set;
      train_set.input_dim = dataset.input_dim;
      train_set.class_names = dataset.class_names;
      if (cell.data_amount == "small") {
        train_set.sequences = groups[cell.group].sequences;
      } else if (cell.data_amount == "large") {
        for (size_t g = 0; g < groups.size(); ++g)
          if (g != cell.group)
            train_set.sequences.insert(train_set.sequences.end(),
                                       groups[g].sequences.begin(),
                                       groups[g].sequences.end());
      } else {
        throw DataError("unknown data amount '" + cell.data_amount + "'");
      }

      TrainConfig cfg = base_config;
      cfg.weights_seed = cell.weights_seed;
      cfg.training_seed = cell.training_seed;

      EpochHook hook;
      if (eval_hook)
        hook = [&](size_t epoch, const nn::Weights& w, float) {
          res.per_epoch_eval.push_back(eval_hook(cell, epoch, w));
        };
      TrainResult tr = train(train_set, spec, cfg, hook);
      res.fingerprint = tr.fingerprint;
      res.final_loss = tr.loss_history.back();
    } catch (const std::exception& e) {
      res.failed = true;
      res.error = e.what();
    }
  };

  if (jobs <= 1) {
    for (size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::atomic<size_t> next{0};
    auto worker = [&] {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= cells.size()) return;
        run_cell(i);
      }
    };
    std::vector<std::thread> pool;
    const int count = std::min<int>(jobs, static_cast<int>(cells.size()));
    pool.reserve(count);
    for (int t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return results;
}

}  // namespace napc::train
