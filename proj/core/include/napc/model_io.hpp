#pragma once

#include <filesystem>
#include <optional>

#include "napc/model.hpp"
#include "napc/quantizer.hpp"

namespace napc::io {

// Model container: magic "NAPC", u32 format version, u64 metadata length,
// UTF-8 JSON metadata (spec, kind, blob table, quantization scales), then raw
// little-endian blobs in the declared order. f32 blobs for float models, i32
// for quantized ones. Exact layout documented in docs/formats.md.

struct LoadedModel {
  nn::ModelSpec spec;
  std::optional<nn::Weights> weights;
  std::optional<quant::QuantizedModel> qmodel;

  bool is_quantized() const { return qmodel.has_value(); }
};

void save_model(const std::filesystem::path& path, const nn::ModelSpec& spec,
                const nn::Weights& weights);

void save_model(const std::filesystem::path& path,
                const quant::QuantizedModel& qmodel);

LoadedModel load_model(const std::filesystem::path& path);

}  // namespace napc::io
