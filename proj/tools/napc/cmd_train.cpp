#include <fstream>
#include <iostream>

#include "napc/cmds.hpp"
#include "napc/digest.hpp"
#include "napc/errors.hpp"
#include "napc/forward.hpp"
#include "napc/rng.hpp"

namespace napc::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

nn::ModelSpec spec_from_config(const KvConfig& cfg, const data::Dataset& ds) {
  nn::ModelSpec spec;
  spec.input_dim = ds.input_dim;
  spec.num_classes = ds.num_classes();
  spec.lstm_layers = static_cast<size_t>(cfg.get_u64("lstm_layers", 2));
  spec.lstm_units = static_cast<size_t>(cfg.get_u64("lstm_units", 16));
  spec.head.abs_activation = cfg.get_bool("abs_activation", true);
  spec.head.cumsum = cfg.get_bool("cumsum", true);
  spec.validate();
  return spec;
}

train::TrainConfig train_config_from_kv(const KvConfig& cfg) {
  train::TrainConfig tc;
  tc.epochs = static_cast<size_t>(cfg.get_u64("epochs", tc.epochs));
  tc.batch_size = static_cast<size_t>(cfg.get_u64("batch_size", tc.batch_size));
  tc.lr0 = static_cast<float>(cfg.get_double("lr0", tc.lr0));
  tc.lr_decay = static_cast<float>(cfg.get_double("lr_decay", tc.lr_decay));
  tc.dropout_rate =
      static_cast<float>(cfg.get_double("dropout_rate", tc.dropout_rate));
  tc.weights_seed = cfg.get_u64("weights_seed", tc.weights_seed);
  tc.training_seed = cfg.get_u64("training_seed", tc.training_seed);
  tc.loss.final_weight =
      static_cast<float>(cfg.get_double("final_weight", tc.loss.final_weight));
  tc.loss.corridor_weight = static_cast<float>(
      cfg.get_double("corridor_weight", tc.loss.corridor_weight));
  tc.clip_norm = static_cast<float>(cfg.get_double("clip_norm", tc.clip_norm));
  return tc;
}

namespace {

ordered_json spec_to_json(const nn::ModelSpec& spec) {
  return ordered_json{{"input_dim", spec.input_dim},
                      {"lstm_layers", spec.lstm_layers},
                      {"lstm_units", spec.lstm_units},
                      {"num_classes", spec.num_classes},
                      {"abs_activation", spec.head.abs_activation},
                      {"cumsum", spec.head.cumsum}};
}

ordered_json train_config_to_json(const train::TrainConfig& tc) {
  return ordered_json{{"epochs", tc.epochs},
                      {"batch_size", tc.batch_size},
                      {"lr0", tc.lr0},
                      {"lr_decay", tc.lr_decay},
                      {"dropout_rate", tc.dropout_rate},
                      {"weights_seed", tc.weights_seed},
                      {"training_seed", tc.training_seed},
                      {"final_weight", tc.loss.final_weight},
                      {"corridor_weight", tc.loss.corridor_weight},
                      {"clip_norm", tc.clip_norm}};
}

void write_checkpoint_sidecar(const fs::path& model_path,
                              const train::TrainConfig& cfg,
                              size_t epochs_completed) {
  write_json_file(model_path.string() + ".rng.json",
                  ordered_json{{"training_seed", cfg.training_seed},
                               {"weights_seed", cfg.weights_seed},
                               {"epochs_completed", epochs_completed}});
}

}  // namespace

void register_train_commands(CLI::App& app) {
  // train
  {
    struct Opts {
      std::string data, spec, config, out, checkpoint_dir, resume;
      int64_t weights_seed = -1, training_seed = -1;
      size_t checkpoint_every = 0;
      bool quiet = false;
    };
    auto opts = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand("train",
                                   "Train a counting model deterministically");
    cmd->add_option("--data", opts->data, "Training store")->required();
    cmd->add_option("--spec", opts->spec, "Model spec (key = value)")->required();
    cmd->add_option("--config", opts->config, "Train config (key = value)")
        ->required();
    cmd->add_option("--out", opts->out, "Output model file")->required();
    cmd->add_option("--weights-seed", opts->weights_seed, "Override weights seed");
    cmd->add_option("--training-seed", opts->training_seed,
                    "Override training seed");
    cmd->add_option("--checkpoint-dir", opts->checkpoint_dir,
                    "Write per-epoch checkpoints here");
    cmd->add_option("--checkpoint-every", opts->checkpoint_every,
                    "Checkpoint interval in epochs (0 = off)");
    cmd->add_option("--resume", opts->resume,
                    "Checkpoint model to resume from (reads its .rng.json)");
    cmd->add_flag("--quiet", opts->quiet, "Suppress per-epoch progress");
    cmd->callback([opts] {
      const data::Dataset ds = data::load_dataset(opts->data);
      const KvConfig spec_kv = KvConfig::from_file(opts->spec);
      const KvConfig cfg_kv = KvConfig::from_file(opts->config);
      const nn::ModelSpec spec = spec_from_config(spec_kv, ds);
      train::TrainConfig tc = train_config_from_kv(cfg_kv);
      if (opts->weights_seed >= 0)
        tc.weights_seed = static_cast<uint64_t>(opts->weights_seed);
      if (opts->training_seed >= 0)
        tc.training_seed = static_cast<uint64_t>(opts->training_seed);

      const train::EpochHook hook = [opts, spec](size_t epoch,
                                                 const nn::Weights& w,
                                                 float loss) {
        if (!opts->quiet)
          std::cerr << "epoch " << epoch << " loss " << loss << "\n";
        if (!opts->checkpoint_dir.empty() && opts->checkpoint_every > 0 &&
            (epoch + 1) % opts->checkpoint_every == 0) {
          fs::create_directories(opts->checkpoint_dir);
          const fs::path ckpt = fs::path(opts->checkpoint_dir) /
                                ("epoch_" + std::to_string(epoch + 1) + ".napc");
          io::save_model(ckpt, spec, w);
        }
      };

      train::TrainResult result;
      if (opts->resume.empty()) {
        result = train::train(ds, spec, tc, hook);
      } else {
        const io::LoadedModel start = io::load_model(opts->resume);
        if (start.is_quantized())
          throw DataError("cannot resume from a quantized model");
        std::ifstream sidecar_in(opts->resume + ".rng.json");
        if (!sidecar_in)
          throw DataError("missing checkpoint sidecar " + opts->resume +
                          ".rng.json");
        nlohmann::json sidecar;
        sidecar_in >> sidecar;
        tc.training_seed = sidecar.at("training_seed").get<uint64_t>();
        tc.weights_seed = sidecar.at("weights_seed").get<uint64_t>();
        const size_t done = sidecar.at("epochs_completed").get<size_t>();
        result = train::resume(ds, spec, tc, *start.weights, done, hook);
      }

      io::save_model(opts->out, spec, result.weights);
      if (!opts->checkpoint_dir.empty() && opts->checkpoint_every > 0) {
        for (size_t e = opts->checkpoint_every; e <= tc.epochs;
             e += opts->checkpoint_every)
          write_checkpoint_sidecar(fs::path(opts->checkpoint_dir) /
                                       ("epoch_" + std::to_string(e) + ".napc"),
                                   tc, e);
      }

      ManifestBuilder manifest("train");
      ordered_json config;
      config["spec"] = spec_to_json(spec);
      config["train"] = train_config_to_json(tc);
      manifest.set_config(std::move(config));
      manifest.add_seed("weights_seed", tc.weights_seed);
      manifest.add_seed("training_seed", tc.training_seed);
      manifest.add_input_dir(opts->data);
      manifest.add_input(opts->spec);
      manifest.add_input(opts->config);
      manifest.add_output(opts->out);
      manifest.write(opts->out);

      std::cout << "final loss " << result.loss_history.back() << " fingerprint "
                << digest_hex(result.fingerprint) << "\n";
    });
  }

  // gridsearch
  {
    struct Opts {
      std::string data, grid, out;
      int jobs = 1;
    };
    auto opts = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand(
        "gridsearch", "Train one model per grid cell and score every epoch");
    cmd->add_option("--data", opts->data, "Input store")->required();
    cmd->add_option("--grid", opts->grid, "Grid config (key = value)")->required();
    cmd->add_option("--out", opts->out, "Output directory")->required();
    cmd->add_option("--jobs", opts->jobs, "Parallel cells (results identical)");
    cmd->callback([opts] {
      const data::Dataset full = data::load_dataset(opts->data);
      const KvConfig grid_kv = KvConfig::from_file(opts->grid);

      train::GridSpec grid;
      grid.group_count = static_cast<size_t>(grid_kv.get_u64("groups", 4));
      grid.split_seed = grid_kv.get_u64("split_seed", 0);
      grid.data_amounts = grid_kv.get_list("data_amounts", {"small", "large"});
      grid.weights_seeds = grid_kv.get_u64_list("weights_seeds", {1, 2});
      grid.training_seeds = grid_kv.get_u64_list("training_seeds", {1, 2});
      for (uint64_t g : grid_kv.get_u64_list("groups_iterated", {}))
        grid.group_indices.push_back(static_cast<size_t>(g));

      const double holdout_fraction =
          grid_kv.get_double("holdout_fraction", 0.2);
      if (!(holdout_fraction > 0 && holdout_fraction < 1))
        throw DataError("holdout_fraction must be in (0, 1)");

      // deterministic holdout split for the per-epoch success-chance metric
      const size_t holdout_n = std::max<size_t>(
          2, static_cast<size_t>(std::llround(
                 holdout_fraction * static_cast<double>(full.sequences.size()))));
      std::vector<size_t> order(full.sequences.size());
      for (size_t i = 0; i < order.size(); ++i) order[i] = i;
      napc::Rng rng = napc::Rng::stream("holdout", grid.split_seed);
      for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.next_below(i)]);
      data::Dataset holdout, pool;
      holdout.input_dim = pool.input_dim = full.input_dim;
      holdout.class_names = pool.class_names = full.class_names;
      for (size_t i = 0; i < order.size(); ++i)
        (i < holdout_n ? holdout : pool)
            .sequences.push_back(full.sequences[order[i]]);

      const nn::ModelSpec spec = spec_from_config(grid_kv, pool);
      const train::TrainConfig base = train_config_from_kv(grid_kv);

      metrics::SimulationConfig sim;
      sim.sample_size = static_cast<size_t>(grid_kv.get_u64("sim_n", 60));
      sim.repetitions = static_cast<size_t>(grid_kv.get_u64("sim_reps", 300));
      sim.seed = grid_kv.get_u64("sim_seed", 0);
      metrics::EquivalenceConfig eq;
      eq.delta = grid_kv.get_double("delta", 0.01);
      eq.confidence = grid_kv.get_double("confidence", 0.95);

      const train::CellEpochEval eval_hook =
          [&](const train::GridCell&, size_t, const nn::Weights& w) {
            std::vector<metrics::EvalRecord> records;
            for (const auto& seq : holdout.sequences) {
              const nn::Prediction pred = nn::forward_sequence(spec, w, seq);
              for (size_t c = 0; c < spec.num_classes; ++c)
                records.push_back({seq.id, c, seq.labels[c],
                                   pred.final_counts[c]});
            }
            const auto pop = metrics::ErrorPopulation::from_records(
                records, spec.num_classes);
            return metrics::test_success_chance(pop, sim, eq).p_hat;
          };

      const auto results = train::grid_search(pool, grid, spec, base, eval_hook,
                                              opts->jobs);

      fs::create_directories(opts->out);
      std::vector<std::string> header = {"cell",          "group",
                                         "data_amount",   "weights_seed",
                                         "training_seed", "status",
                                         "fingerprint",   "final_loss"};
      for (size_t e = 1; e <= base.epochs; ++e)
        header.push_back("sc_e" + std::to_string(e));
      CsvWriter csv(fs::path(opts->out) / "cells.csv", header);
      for (size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        std::vector<std::string> row = {
            std::to_string(i),
            std::to_string(r.cell.group),
            r.cell.data_amount,
            std::to_string(r.cell.weights_seed),
            std::to_string(r.cell.training_seed),
            r.failed ? "failed" : "ok",
            r.failed ? "-" : digest_hex(r.fingerprint),
            r.failed ? "-" : format_double(r.final_loss)};
        for (size_t e = 0; e < base.epochs; ++e)
          row.push_back(e < r.per_epoch_eval.size()
                            ? format_double(r.per_epoch_eval[e])
                            : std::string("-"));
        csv.row(row);
      }
      csv.close();

      ManifestBuilder manifest("gridsearch");
      manifest.set_config(ordered_json{{"grid", opts->grid},
                                       {"jobs", opts->jobs},
                                       {"holdout_fraction", holdout_fraction},
                                       {"sim_n", sim.sample_size},
                                       {"sim_reps", sim.repetitions},
                                       {"delta", eq.delta}});
      manifest.add_seed("split_seed", grid.split_seed);
      manifest.add_seed("sim_seed", sim.seed);
      manifest.add_input_dir(opts->data);
      manifest.add_input(opts->grid);
      manifest.add_output(fs::path(opts->out) / "cells.csv");
      manifest.write(fs::path(opts->out) / "gridsearch");

      size_t failed = 0;
      for (const auto& r : results) failed += r.failed ? 1 : 0;
      std::cout << results.size() << " cells, " << failed << " failed\n";
    });
  }
}

}  // namespace napc::cli
