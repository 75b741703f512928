#include <iostream>
#include <map>

#include "napc/cmds.hpp"
#include "napc/ensemble.hpp"
#include "napc/errors.hpp"

namespace napc::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

void register_ensemble_commands(CLI::App& app) {
  // ensemble
  {
    struct Opts {
      std::vector<std::string> models;
      std::string data, out;
      double tau = 2.0 / 3.0;
    };
    auto opts = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand(
        "ensemble", "Combine model predictions with a per-class quantile");
    cmd->add_option("--models", opts->models, "Comma-separated model files")
        ->required()
        ->delimiter(',');
    cmd->add_option("--tau", opts->tau, "Quantile in [0, 1]");
    cmd->add_option("--data", opts->data, "Input store")->required();
    cmd->add_option("--out", opts->out, "Output CSV")->required();
    cmd->callback([opts] {
      const data::Dataset ds = data::load_dataset(opts->data);
      std::vector<io::LoadedModel> members;
      for (const auto& path : opts->models)
        members.push_back(io::load_model(path));
      if (members.empty()) throw DataError("no models given");

      CsvWriter csv(opts->out, {"seq_id", "class", "count"});
      std::vector<std::vector<double>> finals(members.size());
      for (const auto& seq : ds.sequences) {
        for (size_t m = 0; m < members.size(); ++m)
          finals[m] = model_finals(members[m], seq);
        const std::vector<int64_t> combined =
            ens::quantile_combine(finals, opts->tau);
        for (size_t c = 0; c < ds.num_classes(); ++c)
          csv.row({seq.id, ds.class_names[c], std::to_string(combined[c])});
      }
      csv.close();

      ManifestBuilder manifest("ensemble");
      manifest.set_config(ordered_json{{"models", opts->models},
                                       {"tau", opts->tau},
                                       {"data", opts->data}});
      for (const auto& path : opts->models) manifest.add_input(path);
      manifest.add_input_dir(opts->data);
      manifest.add_output(opts->out);
      manifest.write(opts->out);
    });
  }

  // rank
  {
    struct Opts {
      std::vector<std::string> models;
      std::string pop_dir, out;
      size_t n = 3600, reps = 10000;
      double delta = 0.01, confidence = 0.95;
      uint64_t seed = 0;
      int jobs = 1;
    };
    auto opts = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand(
        "rank", "Sort models by their equivalence-test success chance");
    cmd->add_option("--models", opts->models, "Comma-separated model files")
        ->required()
        ->delimiter(',');
    cmd->add_option("--pop-dir", opts->pop_dir,
                    "Directory of <model-stem>.csv populations")
        ->required();
    cmd->add_option("--n", opts->n, "Sample size");
    cmd->add_option("--reps", opts->reps, "Bootstrap repetitions");
    cmd->add_option("--delta", opts->delta, "Equivalence margin");
    cmd->add_option("--confidence", opts->confidence, "One-sided level per side");
    cmd->add_option("--seed", opts->seed, "Bootstrap seed")->required();
    cmd->add_option("--jobs", opts->jobs, "Worker threads");
    cmd->add_option("--out", opts->out, "Output JSON")->required();
    cmd->callback([opts] {
      std::map<std::string, metrics::ErrorPopulation> pops;
      for (const auto& model : opts->models) {
        const std::string stem = fs::path(model).stem().string();
        const fs::path pop_path = fs::path(opts->pop_dir) / (stem + ".csv");
        pops.emplace(stem, read_population_csv(pop_path));
      }
      metrics::SimulationConfig sim{opts->n, opts->reps, opts->seed, opts->jobs};
      metrics::EquivalenceConfig eq{opts->delta, opts->confidence, true};
      const ens::RankedPool pool = ens::rank_members(pops, sim, eq);

      ordered_json j = ordered_json::array();
      for (const auto& m : pool.models)
        j.push_back(ordered_json{{"model", m.model_id}, {"score", m.score}});
      write_json_file(opts->out, ordered_json{{"ranking", j}});

      ManifestBuilder manifest("rank");
      manifest.set_config(ordered_json{{"models", opts->models},
                                       {"pop_dir", opts->pop_dir},
                                       {"n", opts->n},
                                       {"reps", opts->reps},
                                       {"delta", opts->delta}});
      manifest.add_seed("seed", opts->seed);
      for (const auto& model : opts->models) {
        const std::string stem = fs::path(model).stem().string();
        manifest.add_input(fs::path(opts->pop_dir) / (stem + ".csv"));
      }
      manifest.add_output(opts->out);
      manifest.write(opts->out);

      for (const auto& m : pool.models)
        std::cout << m.model_id << " " << m.score << "\n";
    });
  }
}

}  // namespace napc::cli
