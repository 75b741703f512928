#include <iostream>

#include "napc/cmds.hpp"
#include "napc/errors.hpp"
#include "napc/quantizer.hpp"

namespace napc::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

void register_quantize_commands(CLI::App& app) {
  struct Opts {
    std::string model, calib, out, report, mode = "float";
    double eps = 0.45;
    int bits = 32;
    uint64_t seed = 0;
    int max_iters = 512;
    int exp_min = -1, exp_max = -1;
    bool embed_luts = false;
  };
  auto opts = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand(
      "quantize", "Greedy Monte Carlo scale search for an integer-weight model");
  cmd->add_option("--model", opts->model, "Float template model")->required();
  cmd->add_option("--calib", opts->calib, "Calibration store (labels unused)")
      ->required();
  cmd->add_option("--eps", opts->eps, "Per-frame absolute margin");
  cmd->add_option("--bits", opts->bits, "Bit width, 16 or 32");
  cmd->add_option("--seed", opts->seed, "Search seed");
  cmd->add_option("--max-iters", opts->max_iters, "Draws per layer");
  cmd->add_option("--exp-min", opts->exp_min, "Smallest scale exponent");
  cmd->add_option("--exp-max", opts->exp_max, "Largest scale exponent");
  cmd->add_option("--mode", opts->mode, "Activation mode: float or lut");
  cmd->add_flag("--embed-luts", opts->embed_luts,
                "Store activation tables in the model file");
  cmd->add_option("--out", opts->out, "Output quantized model")->required();
  cmd->add_option("--report", opts->report, "Margin report JSON");
  cmd->callback([opts] {
    const io::LoadedModel tmpl = io::load_model(opts->model);
    if (tmpl.is_quantized())
      throw DataError("template must be a float model");
    const data::Dataset calib_ds = data::load_dataset(opts->calib);

    quant::QuantizerConfig qc = quant::QuantizerConfig::defaults_for(opts->bits);
    qc.epsilon = opts->eps;
    qc.seed = opts->seed;
    qc.max_iters = opts->max_iters;
    if (opts->exp_min >= 0) qc.exp_min = opts->exp_min;
    if (opts->exp_max >= 0) qc.exp_max = opts->exp_max;
    if (opts->mode == "lut")
      qc.activation_mode = quant::ActivationMode::kLut;
    else if (opts->mode != "float")
      throw DataError("mode must be 'float' or 'lut'");
    qc.embed_luts = opts->embed_luts;

    const quant::CalibrationSet calib = quant::CalibrationSet::build(
        tmpl.spec, *tmpl.weights, calib_ds.sequences);
    const quant::QuantizedModel qm =
        quant::quantize_model(*tmpl.weights, tmpl.spec, calib, qc);
    io::save_model(opts->out, qm);

    const quant::MarginReport report = verify_margin(qm, calib, qc.epsilon);
    ordered_json rj;
    rj["epsilon"] = qc.epsilon;
    rj["pass"] = report.pass;
    rj["max_abs_dev"] = report.max_abs_dev;
    ordered_json per_seq = ordered_json::array();
    for (const auto& s : report.per_sequence)
      per_seq.push_back(
          ordered_json{{"id", s.id}, {"max_abs_dev", s.max_abs_dev}});
    rj["per_sequence"] = std::move(per_seq);
    ordered_json scales = ordered_json::array();
    for (size_t k = 0; k < qm.scales.size(); ++k)
      scales.push_back(ordered_json{
          {"layer", quant::QuantizedModel::layer_name(k, qm.spec.lstm_layers)},
          {"w_exp", qm.scales[k].w_exp},
          {"i_exp", qm.scales[k].i_exp}});
    rj["scales"] = std::move(scales);
    if (!opts->report.empty()) write_json_file(opts->report, rj);

    ManifestBuilder manifest("quantize");
    manifest.set_config(ordered_json{{"eps", qc.epsilon},
                                     {"bits", qc.bit_width},
                                     {"max_iters", qc.max_iters},
                                     {"exp_min", qc.exp_min},
                                     {"exp_max", qc.exp_max},
                                     {"mode", opts->mode},
                                     {"embed_luts", qc.embed_luts}});
    manifest.add_seed("seed", qc.seed);
    manifest.add_input(opts->model);
    manifest.add_input_dir(opts->calib);
    manifest.add_output(opts->out);
    manifest.write(opts->out);

    std::cout << "quantized, max_abs_dev " << report.max_abs_dev << " (eps "
              << qc.epsilon << ")\n";
  });
}

}  // namespace napc::cli
