#include "napc/cmds.hpp"

namespace napc::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

data::SyntheticConfig synth_config_from_kv(const KvConfig& cfg) {
  data::SyntheticConfig sc;
  sc.input_dim = static_cast<size_t>(cfg.get_u64("input_dim", sc.input_dim));
  sc.num_sequences =
      static_cast<size_t>(cfg.get_u64("num_sequences", sc.num_sequences));
  sc.frames_min = static_cast<size_t>(cfg.get_u64("frames_min", sc.frames_min));
  sc.frames_max = static_cast<size_t>(cfg.get_u64("frames_max", sc.frames_max));
  sc.events_min = cfg.get_int("events_min", sc.events_min);
  sc.events_max = cfg.get_int("events_max", sc.events_max);
  sc.event_duration_min = static_cast<size_t>(
      cfg.get_u64("event_duration_min", sc.event_duration_min));
  sc.event_duration_max = static_cast<size_t>(
      cfg.get_u64("event_duration_max", sc.event_duration_max));
  sc.amplitude_min = cfg.get_double("amplitude_min", sc.amplitude_min);
  sc.amplitude_max = cfg.get_double("amplitude_max", sc.amplitude_max);
  sc.noise_std = cfg.get_double("noise_std", sc.noise_std);
  sc.seed = cfg.get_u64("seed", sc.seed);
  sc.class_names = cfg.get_list("class_names", sc.class_names);
  return sc;
}

ordered_json synth_config_to_json(const data::SyntheticConfig& sc) {
  return ordered_json{{"input_dim", sc.input_dim},
                      {"num_sequences", sc.num_sequences},
                      {"frames_min", sc.frames_min},
                      {"frames_max", sc.frames_max},
                      {"events_min", sc.events_min},
                      {"events_max", sc.events_max},
                      {"event_duration_min", sc.event_duration_min},
                      {"event_duration_max", sc.event_duration_max},
                      {"amplitude_min", sc.amplitude_min},
                      {"amplitude_max", sc.amplitude_max},
                      {"noise_std", sc.noise_std},
                      {"seed", sc.seed},
                      {"class_names", sc.class_names}};
}

}  // namespace

void register_data_commands(CLI::App& app) {
  // synth
  {
    auto opts = std::make_shared<std::tuple<std::string, std::string, int64_t>>();
    auto* cmd = app.add_subcommand("synth", "Generate a synthetic labeled store");
    cmd->add_option("--config", std::get<0>(*opts), "Synthetic config (key = value)")
        ->required();
    cmd->add_option("--out", std::get<1>(*opts), "Output store directory")
        ->required();
    std::get<2>(*opts) = -1;
    cmd->add_option("--seed", std::get<2>(*opts), "Override the config seed");
    cmd->callback([opts] {
      const auto& [config_path, out_dir, seed_override] = *opts;
      data::SyntheticConfig sc =
          synth_config_from_kv(KvConfig::from_file(config_path));
      if (seed_override >= 0) sc.seed = static_cast<uint64_t>(seed_override);
      const data::Dataset ds = data::synth_generate(sc);
      data::save_dataset(ds, out_dir);

      ManifestBuilder manifest("synth");
      manifest.set_config(synth_config_to_json(sc));
      manifest.add_seed("seed", sc.seed);
      manifest.add_input(config_path);
      manifest.add_output(fs::path(out_dir) / "index.json");
      manifest.add_output(fs::path(out_dir) / "frames.bin");
      manifest.write(fs::path(out_dir) / "store");
      std::cout << "wrote " << ds.sequences.size() << " sequences to " << out_dir
                << "\n";
    });
  }

  // split
  {
    struct Opts {
      std::string data, out;
      size_t groups = 4;
      uint64_t seed = 0;
    };
    auto opts = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand(
        "split", "Shuffle and partition a store into mutually exclusive groups");
    cmd->add_option("--data", opts->data, "Input store directory")->required();
    cmd->add_option("--groups", opts->groups, "Number of groups")->required();
    cmd->add_option("--seed", opts->seed, "Shuffle seed")->required();
    cmd->add_option("--out", opts->out, "Output directory")->required();
    cmd->callback([opts] {
      const data::Dataset ds = data::load_dataset(opts->data);
      const auto groups = data::split_groups(ds, opts->groups, opts->seed);
      fs::create_directories(opts->out);
      ManifestBuilder manifest("split");
      manifest.set_config(ordered_json{{"data", opts->data},
                                       {"groups", opts->groups},
                                       {"seed", opts->seed},
                                       {"out", opts->out}});
      manifest.add_seed("seed", opts->seed);
      manifest.add_input_dir(opts->data);
      for (size_t g = 0; g < groups.size(); ++g) {
        const fs::path dir = fs::path(opts->out) / ("group_" + std::to_string(g));
        data::save_dataset(groups[g], dir);
        manifest.add_output(dir / "index.json");
        manifest.add_output(dir / "frames.bin");
      }
      manifest.write(fs::path(opts->out) / "split");
      std::cout << "wrote " << groups.size() << " groups to " << opts->out << "\n";
    });
  }
}

}  // namespace napc::cli
