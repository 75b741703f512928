#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "napc/dataio.hpp"
#include "napc/model.hpp"

namespace napc::quant {

enum class ActivationMode { kFloat, kLut };

// Per-layer input/weight scale pair. Scales are powers of two so rescaling
// between layers is exact shifting; only the exponents are stored.
struct ScalePair {
  int w_exp = 0;  // w_n = 2^w_exp
  int i_exp = 0;  // i_n = 2^i_exp

  double w() const { return std::ldexp(1.0, w_exp); }
  double i() const { return std::ldexp(1.0, i_exp); }
  bool operator==(const ScalePair&) const = default;
};

struct QuantizedLstmLayer {
  Mat<int32_t> w;          // round(W * w_n)
  Mat<int32_t> u;          // round(U * w_n)
  std::vector<int32_t> b;  // round(B * w_n * i_n)
};

// Integer-weight model. Layer order is fc_in, lstm[0..L), fc_out; scales[k]
// belongs to layer k in that order. Output scale o_n is w_n*i_n for FC layers
// and i_n for LSTM layers.
struct QuantizedModel {
  nn::ModelSpec spec;
  int bit_width = 32;  // 16 or 32; storage is int32 either way
  ActivationMode activation_mode = ActivationMode::kFloat;

  Mat<int32_t> fc_in_w;
  std::vector<int32_t> fc_in_b;
  std::vector<QuantizedLstmLayer> lstm;
  Mat<int32_t> fc_out_w;
  std::vector<int32_t> fc_out_b;
  std::vector<ScalePair> scales;  // lstm_layers + 2 entries

  // Largest |input value| the engine must accept, recorded from the
  // calibration set; the load-time overflow pre-check depends on it.
  float input_bound = 1.0f;

  // LUT configuration; tables may be embedded in the model file for
  // bit-exact cross-platform replay.
  size_t lut_resolution = 2048;
  double lut_clamp = 8.0;
  std::vector<float> lut_sigmoid;  // optional, lut_resolution entries
  std::vector<float> lut_tanh;

  size_t layer_count() const { return spec.lstm_layers + 2; }

  /// o_n exponent of layer k (0 = fc_in, 1..L = lstm, L+1 = fc_out).
  int out_scale_exp(size_t k) const {
    const ScalePair& s = scales[k];
    const bool is_lstm = k >= 1 && k <= spec.lstm_layers;
    return is_lstm ? s.i_exp : s.w_exp + s.i_exp;
  }

  static std::string layer_name(size_t k, size_t lstm_layers) {
    if (k == 0) return "fc_in";
    if (k <= lstm_layers) return "lstm" + std::to_string(k - 1);
    return "fc_out";
  }
};

struct QuantizerConfig {
  double epsilon = 0.45;  // absolute per-frame margin vs the float reference
  int max_iters = 512;    // draws per layer before giving up
  int exp_min = 0;
  int exp_max = 30;       // [0,15] for 16-bit, [0,30] for 32-bit
  int bit_width = 32;
  uint64_t seed = 0;
  ActivationMode activation_mode = ActivationMode::kFloat;
  size_t lut_resolution = 2048;
  double lut_clamp = 8.0;
  bool embed_luts = false;

  static QuantizerConfig defaults_for(int bit_width) {
    QuantizerConfig c;
    c.bit_width = bit_width;
    c.exp_max = bit_width == 16 ? 15 : 30;
    return c;
  }
  void validate() const;
};

// Unlabeled reference sequences plus the float template's per-frame outputs.
struct CalibrationSet {
  std::vector<data::Sequence> sequences;
  std::vector<nn::Prediction> references;  // 32-bit float outputs

  static CalibrationSet build(const nn::ModelSpec& spec,
                              const nn::Weights& weights,
                              std::vector<data::Sequence> sequences);
};

struct ScaledFc {
  Mat<int32_t> w;
  std::vector<int32_t> b;
};
struct ScaledLstm {
  Mat<int32_t> w;
  Mat<int32_t> u;
  std::vector<int32_t> b;
};

/// W~ = round(W*w_n), B~ = round(B*w_n*i_n). Returns nullopt when any value
/// does not fit bit_width signed (the search resamples on that signal).
std::optional<ScaledFc> scale_fc(const MatF& w, const std::vector<float>& b,
                                 ScalePair s, int bit_width);

/// W~ = round(W*w_n), U~ = round(U*w_n), B~ = round(B*w_n*i_n).
std::optional<ScaledLstm> scale_lstm(const MatF& w, const MatF& u,
                                     const std::vector<float>& b, ScalePair s,
                                     int bit_width);

// Greedy Monte Carlo scale search, layers processed front to back. Both
// members of a layer's scale pair are resampled jointly on rejection; a layer
// is accepted only when the hybrid network (quantized prefix through that
// layer, float weights behind it) stays within epsilon of the float reference
// at every frame and class of every calibration sequence. Deterministic per
// (template, calib, config). Throws QuantizeExhausted naming the layer when
// max_iters draws all fail.
QuantizedModel quantize_model(const nn::Weights& template_weights,
                              const nn::ModelSpec& spec,
                              const CalibrationSet& calib,
                              const QuantizerConfig& config);

struct MarginReport {
  struct PerSequence {
    std::string id;
    double max_abs_dev;
  };
  std::vector<PerSequence> per_sequence;
  double max_abs_dev = 0.0;
  bool pass = false;
};

/// Re-run the quantized model over the calibration set and report the largest
/// per-frame absolute deviation from the float references.
MarginReport verify_margin(const QuantizedModel& qmodel,
                           const CalibrationSet& calib, double epsilon);

}  // namespace napc::quant
