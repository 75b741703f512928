#pragma once

#include <CLI11.hpp>

#include "napc/common.hpp"
#include "napc/dataio.hpp"
#include "napc/metrics.hpp"
#include "napc/model.hpp"
#include "napc/model_io.hpp"
#include "napc/trainer.hpp"

namespace napc::cli {

void register_data_commands(CLI::App& app);
void register_train_commands(CLI::App& app);
void register_quantize_commands(CLI::App& app);
void register_infer_commands(CLI::App& app);
void register_metrics_commands(CLI::App& app);
void register_ensemble_commands(CLI::App& app);

// shared helpers

/// Model architecture keys from a kv file; dims come from the dataset.
nn::ModelSpec spec_from_config(const KvConfig& cfg, const data::Dataset& ds);

train::TrainConfig train_config_from_kv(const KvConfig& cfg);

/// Unrounded final counts of a float or quantized model on one sequence.
std::vector<double> model_finals(const io::LoadedModel& model,
                                 const data::Sequence& seq);

metrics::ErrorPopulation read_population_csv(const std::filesystem::path& path);

void write_population_csv(const std::filesystem::path& path,
                          const metrics::ErrorPopulation& pop,
                          const std::vector<std::string>& class_names);

}  // namespace napc::cli
