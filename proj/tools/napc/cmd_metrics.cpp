#include <iostream>

#include "napc/cmds.hpp"
#include "napc/errors.hpp"

namespace napc::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

metrics::ErrorPopulation read_population_csv(const fs::path& path) {
  const auto rows = read_csv(path, 4);
  // class names map onto indices in first-appearance order
  std::vector<std::string> class_names;
  std::vector<metrics::EvalRecord> records;
  for (const auto& row : rows) {
    const std::string& cls = row[1];
    size_t idx = class_names.size();
    for (size_t i = 0; i < class_names.size(); ++i)
      if (class_names[i] == cls) idx = i;
    if (idx == class_names.size()) class_names.push_back(cls);
    records.push_back({row[0], idx, std::stoll(row[2]), std::stoll(row[3])});
  }
  if (records.empty()) throw DataError("population CSV " + path.string() + " is empty");
  return metrics::ErrorPopulation::from_records(records, class_names.size());
}

void write_population_csv(const fs::path& path,
                          const metrics::ErrorPopulation& pop,
                          const std::vector<std::string>& class_names) {
  CsvWriter csv(path, {"seq_id", "class", "manual", "automatic"});
  for (const auto& s : pop.sequences)
    for (size_t c = 0; c < pop.num_classes; ++c)
      csv.row({s.seq_id,
               c < class_names.size() ? class_names[c] : std::to_string(c),
               std::to_string(s.manual[c]), std::to_string(s.automatic[c])});
  csv.close();
}

void register_metrics_commands(CLI::App& app) {
  // eval
  {
    struct Opts {
      std::string pred, truth, out, pop_out;
      double delta = 0.01, confidence = 0.95;
      bool per_class = false;
    };
    auto opts = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand(
        "eval", "Join predictions with labels and compute counting metrics");
    cmd->add_option("--pred", opts->pred, "Prediction CSV from `napc infer`")
        ->required();
    cmd->add_option("--truth", opts->truth, "Store with manual labels")
        ->required();
    cmd->add_option("--out", opts->out, "Metrics JSON")->required();
    cmd->add_option("--pop-out", opts->pop_out,
                    "Also write the error population CSV");
    cmd->add_option("--delta", opts->delta, "Equivalence margin");
    cmd->add_option("--confidence", opts->confidence, "One-sided level per side");
    cmd->add_flag("--per-class", opts->per_class,
                  "Require every class to pass instead of pooling");
    cmd->callback([opts] {
      const data::Dataset truth = data::load_dataset(opts->truth);
      const auto rows = read_csv(opts->pred, 3);

      std::vector<metrics::EvalRecord> records;
      for (const auto& row : rows) {
        const data::Sequence* seq = truth.find(row[0]);
        if (!seq)
          throw DataError("prediction for unknown sequence '" + row[0] + "'");
        size_t cls = truth.class_names.size();
        for (size_t c = 0; c < truth.class_names.size(); ++c)
          if (truth.class_names[c] == row[1]) cls = c;
        if (cls == truth.class_names.size())
          throw DataError("prediction for unknown class '" + row[1] + "'");
        records.push_back({row[0], cls, seq->labels[cls], std::stoll(row[2])});
      }
      const auto pop = metrics::ErrorPopulation::from_records(
          records, truth.class_names.size());

      metrics::EquivalenceConfig eq;
      eq.delta = opts->delta;
      eq.confidence = opts->confidence;
      eq.pooled = !opts->per_class;
      const auto eq_result = metrics::equivalence_test(pop, eq);

      ordered_json j;
      j["sequences"] = pop.sequences.size();
      j["relative_bias"] = metrics::relative_bias(records);
      j["accuracy"] = metrics::accuracy(pop);
      j["equivalence"] = ordered_json{{"delta", eq.delta},
                                      {"confidence", eq.confidence},
                                      {"pooled", eq.pooled},
                                      {"pass", eq_result.pass},
                                      {"ci_lo", eq_result.ci_lo},
                                      {"ci_hi", eq_result.ci_hi},
                                      {"rel_bias", eq_result.rel_bias}};
      write_json_file(opts->out, j);
      if (!opts->pop_out.empty())
        write_population_csv(opts->pop_out, pop, truth.class_names);

      ManifestBuilder manifest("eval");
      manifest.set_config(ordered_json{{"pred", opts->pred},
                                       {"truth", opts->truth},
                                       {"delta", opts->delta},
                                       {"confidence", opts->confidence},
                                       {"per_class", opts->per_class}});
      manifest.add_input(opts->pred);
      manifest.add_input_dir(opts->truth);
      manifest.add_output(opts->out);
      if (!opts->pop_out.empty()) manifest.add_output(opts->pop_out);
      manifest.write(opts->out);
    });
  }

  // simulate
  {
    struct Opts {
      std::string pop, out;
      size_t n = 3600, reps = 10000;
      double delta = 0.01, confidence = 0.95;
      uint64_t seed = 0;
      int jobs = 1;
      bool per_class = false;
    };
    auto opts = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand(
        "simulate", "Bootstrap the equivalence-test success chance");
    cmd->add_option("--pop", opts->pop, "Population CSV")->required();
    cmd->add_option("--n", opts->n, "Sample size");
    cmd->add_option("--reps", opts->reps, "Bootstrap repetitions");
    cmd->add_option("--delta", opts->delta, "Equivalence margin");
    cmd->add_option("--confidence", opts->confidence, "One-sided level per side");
    cmd->add_option("--seed", opts->seed, "Bootstrap seed")->required();
    cmd->add_option("--jobs", opts->jobs, "Worker threads (results identical)");
    cmd->add_flag("--per-class", opts->per_class, "Per-class test");
    cmd->add_option("--out", opts->out, "Output JSON")->required();
    cmd->callback([opts] {
      const auto pop = read_population_csv(opts->pop);
      metrics::SimulationConfig sim{opts->n, opts->reps, opts->seed, opts->jobs};
      metrics::EquivalenceConfig eq{opts->delta, opts->confidence,
                                    !opts->per_class};
      const auto est = metrics::test_success_chance(pop, sim, eq);

      ordered_json j;
      j["population_sequences"] = pop.sequences.size();
      j["n"] = sim.sample_size;
      j["repetitions"] = sim.repetitions;
      j["seed"] = sim.seed;
      j["delta"] = eq.delta;
      j["confidence"] = eq.confidence;
      j["pooled"] = eq.pooled;
      j["passes"] = est.passes;
      j["degenerate"] = est.degenerate;
      j["success_chance"] = est.p_hat;
      write_json_file(opts->out, j);

      ManifestBuilder manifest("simulate");
      manifest.set_config(ordered_json{{"pop", opts->pop},
                                       {"n", opts->n},
                                       {"reps", opts->reps},
                                       {"delta", opts->delta},
                                       {"confidence", opts->confidence},
                                       {"per_class", opts->per_class}});
      manifest.add_seed("seed", opts->seed);
      manifest.add_input(opts->pop);
      manifest.add_output(opts->out);
      manifest.write(opts->out);

      std::cout << "success chance " << est.p_hat << "\n";
    });
  }

  // curve
  {
    struct Opts {
      std::string pop, out, n_grid = "100:6000:100";
      size_t reps = 10000;
      double delta = 0.01, confidence = 0.95;
      uint64_t seed = 0;
      int jobs = 1;
      bool per_class = false;
    };
    auto opts = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand(
        "curve", "Success chance as a function of the sample size");
    cmd->add_option("--pop", opts->pop, "Population CSV")->required();
    cmd->add_option("--n-grid", opts->n_grid,
                    "lo:hi:step or comma list (default 100:6000:100)");
    cmd->add_option("--reps", opts->reps, "Bootstrap repetitions per n");
    cmd->add_option("--delta", opts->delta, "Equivalence margin");
    cmd->add_option("--confidence", opts->confidence, "One-sided level per side");
    cmd->add_option("--seed", opts->seed, "Bootstrap seed")->required();
    cmd->add_option("--jobs", opts->jobs, "Worker threads (results identical)");
    cmd->add_flag("--per-class", opts->per_class, "Per-class test");
    cmd->add_option("--out", opts->out, "Output CSV")->required();
    cmd->callback([opts] {
      const auto pop = read_population_csv(opts->pop);
      const std::vector<size_t> grid = parse_n_grid(opts->n_grid);
      metrics::SimulationConfig sim{0, opts->reps, opts->seed, opts->jobs};
      metrics::EquivalenceConfig eq{opts->delta, opts->confidence,
                                    !opts->per_class};
      const auto curve = metrics::success_curve(pop, grid, sim, eq);

      CsvWriter csv(opts->out, {"n", "success_chance", "passes", "degenerate",
                                "repetitions"});
      for (const auto& [n, est] : curve)
        csv.row({std::to_string(n), format_double(est.p_hat),
                 std::to_string(est.passes), std::to_string(est.degenerate),
                 std::to_string(est.repetitions)});
      csv.close();

      ManifestBuilder manifest("curve");
      manifest.set_config(ordered_json{{"pop", opts->pop},
                                       {"n_grid", opts->n_grid},
                                       {"reps", opts->reps},
                                       {"delta", opts->delta}});
      manifest.add_seed("seed", opts->seed);
      manifest.add_input(opts->pop);
      manifest.add_output(opts->out);
      manifest.write(opts->out);
    });
  }
}

}  // namespace napc::cli
