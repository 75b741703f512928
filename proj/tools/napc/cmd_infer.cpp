#include <iostream>

#include "napc/cmds.hpp"
#include "napc/errors.hpp"
#include "napc/forward.hpp"
#include "napc/fxp.hpp"

namespace napc::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::vector<double> model_finals(const io::LoadedModel& model,
                                 const data::Sequence& seq) {
  nn::Prediction pred;
  if (model.is_quantized())
    pred = fxp::fxp_forward_sequence(*model.qmodel, seq);
  else
    pred = nn::forward_sequence(model.spec, *model.weights, seq);
  const size_t classes = pred.num_classes;
  std::vector<double> out(classes, 0.0);
  if (pred.frame_count() > 0)
    for (size_t c = 0; c < classes; ++c)
      out[c] = static_cast<double>(pred.frame(pred.frame_count() - 1)[c]);
  return out;
}

void register_infer_commands(CLI::App& app) {
  // infer
  {
    struct Opts {
      std::string model, data, out;
    };
    auto opts = std::make_shared<Opts>();
    auto* cmd =
        app.add_subcommand("infer", "Run a model over a store, one row per class");
    cmd->add_option("--model", opts->model, "Model file (float or quantized)")
        ->required();
    cmd->add_option("--data", opts->data, "Input store")->required();
    cmd->add_option("--out", opts->out, "Output CSV")->required();
    cmd->callback([opts] {
      const io::LoadedModel model = io::load_model(opts->model);
      const data::Dataset ds = data::load_dataset(opts->data);
      if (ds.input_dim != model.spec.input_dim)
        throw DataError("store dimension does not match the model");

      CsvWriter csv(opts->out, {"seq_id", "class", "final_count", "float_final"});
      for (const auto& seq : ds.sequences) {
        const std::vector<double> finals = model_finals(model, seq);
        for (size_t c = 0; c < finals.size(); ++c)
          csv.row({seq.id, ds.class_names[c],
                   std::to_string(static_cast<int64_t>(std::round(finals[c]))),
                   format_double(finals[c])});
      }
      csv.close();

      ManifestBuilder manifest("infer");
      manifest.set_config(ordered_json{{"model", opts->model},
                                       {"data", opts->data},
                                       {"out", opts->out}});
      manifest.add_input(opts->model);
      manifest.add_input_dir(opts->data);
      manifest.add_output(opts->out);
      manifest.write(opts->out);
    });
  }

  // bench
  {
    struct Opts {
      std::string model, data, seq, out;
      int reps = 10;
    };
    auto opts = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand(
        "bench", "Single-core throughput in real-time 10 FPS sensor instances");
    cmd->add_option("--model", opts->model, "Model file")->required();
    cmd->add_option("--data", opts->data, "Store holding the sequence")
        ->required();
    cmd->add_option("--seq", opts->seq, "Sequence id (default: first)");
    cmd->add_option("--reps", opts->reps, "Repetitions");
    cmd->add_option("--out", opts->out, "Output JSON")->required();
    cmd->callback([opts] {
      const io::LoadedModel model = io::load_model(opts->model);
      const data::Dataset ds = data::load_dataset(opts->data);
      if (ds.sequences.empty()) throw DataError("store is empty");
      const data::Sequence* seq = opts->seq.empty() ? &ds.sequences.front()
                                                    : ds.find(opts->seq);
      if (!seq) throw DataError("no sequence with id '" + opts->seq + "'");

      fxp::BenchReport report;
      if (model.is_quantized())
        report = fxp::benchmark_quantized(*model.qmodel, *seq, opts->reps,
                                          opts->model);
      else
        report = fxp::benchmark_float(model.spec, *model.weights, *seq,
                                      opts->reps, opts->model);

      ordered_json j;
      j["platform"] = report.platform;
      j["model"] = report.model_id;
      j["quantized"] = model.is_quantized();
      j["sequence"] = seq->id;
      j["frames_processed"] = report.frames_processed;
      j["repetitions"] = report.repetitions;
      j["wall_seconds"] = report.wall_seconds;
      j["user_seconds"] = report.user_seconds;
      j["frames_per_second"] = report.frames_per_second;
      j["realtime_instances"] = report.realtime_instances;
      write_json_file(opts->out, j);

      ManifestBuilder manifest("bench");
      manifest.set_config(ordered_json{{"model", opts->model},
                                       {"data", opts->data},
                                       {"seq", seq->id},
                                       {"reps", opts->reps}});
      manifest.add_input(opts->model);
      manifest.add_input_dir(opts->data);
      manifest.add_output(opts->out);
      manifest.write(opts->out);

      std::cout << report.frames_per_second << " frames/s = "
                << report.realtime_instances << " real-time instances\n";
    });
  }

  // loop
  {
    struct Opts {
      std::string model, data, seq, out;
      size_t k = 200;
    };
    auto opts = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand(
        "loop", "Repeat one sequence k times and trace the count per repetition");
    cmd->add_option("--model", opts->model, "Model file")->required();
    cmd->add_option("--data", opts->data, "Store holding the sequence")
        ->required();
    cmd->add_option("--seq", opts->seq, "Sequence id")->required();
    cmd->add_option("--k", opts->k, "Loop count");
    cmd->add_option("--out", opts->out, "Output CSV")->required();
    cmd->callback([opts] {
      const io::LoadedModel model = io::load_model(opts->model);
      const data::Dataset ds = data::load_dataset(opts->data);
      const data::Sequence* base = ds.find(opts->seq);
      if (!base) throw DataError("no sequence with id '" + opts->seq + "'");
      const data::Sequence looped = data::loop_sequence(*base, opts->k);

      nn::Prediction pred;
      if (model.is_quantized())
        pred = fxp::fxp_forward_sequence(*model.qmodel, looped);
      else
        pred = nn::forward_sequence(model.spec, *model.weights, looped);

      const size_t frames_per_loop = base->frame_count();
      CsvWriter csv(opts->out, {"iteration", "class", "value", "count"});
      for (size_t i = 1; i <= opts->k; ++i) {
        const float* at_end = pred.frame(i * frames_per_loop - 1);
        for (size_t c = 0; c < ds.num_classes(); ++c)
          csv.row({std::to_string(i), ds.class_names[c],
                   format_double(at_end[c]),
                   std::to_string(static_cast<int64_t>(
                       std::round(at_end[c])))});
      }
      csv.close();

      ManifestBuilder manifest("loop");
      manifest.set_config(ordered_json{{"model", opts->model},
                                       {"data", opts->data},
                                       {"seq", opts->seq},
                                       {"k", opts->k}});
      manifest.add_input(opts->model);
      manifest.add_input_dir(opts->data);
      manifest.add_output(opts->out);
      manifest.write(opts->out);
    });
  }
}

}  // namespace napc::cli
