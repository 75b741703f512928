#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "napc/dataio.hpp"
#include "napc/model.hpp"
#include "napc/quantizer.hpp"

namespace napc::fxp {

/// Shift an integer by a power of two; negative shifts round half away from
/// zero. Exact for non-negative shifts.
int64_t rescale_pow2(int64_t v, int shift);

/// Round a float to the nearest integer, half away from zero.
int64_t round_to_int(double x);

// Uniform-grid lookup table over [-clamp, clamp] with linear interpolation
// and saturation outside. Evaluation uses only +,-,*,/ so a stored table
// replays bit-identically across platforms.
struct ActivationTable {
  enum class Fn { kSigmoid, kTanh };

  double clamp = 8.0;
  size_t resolution = 2048;
  std::vector<float> values;
  double max_error = 0.0;  // measured against the exact function at build

  static ActivationTable build(Fn fn, size_t resolution, double clamp);
  static ActivationTable from_values(std::vector<float> values, double clamp);

  float eval(float x) const {
    const float lo = static_cast<float>(-clamp);
    const float step =
        static_cast<float>(2.0 * clamp / static_cast<double>(resolution - 1));
    if (x <= lo) return values.front();
    const float u = (x - lo) / step;
    const size_t idx = static_cast<size_t>(u);
    if (idx + 1 >= resolution) return values.back();
    const float frac = u - static_cast<float>(idx);
    return values[idx] + frac * (values[idx + 1] - values[idx]);
  }
};

/// Gate activations, either exact float functions or lookup tables.
struct ActivationFns {
  const ActivationTable* sigmoid_lut = nullptr;
  const ActivationTable* tanh_lut = nullptr;

  float sigmoid(float x) const {
    return sigmoid_lut ? sigmoid_lut->eval(x)
                       : 1.0f / (1.0f + std::exp(-x));
  }
  float tanh(float x) const { return tanh_lut ? tanh_lut->eval(x) : std::tanh(x); }
};

/// Integer affine, O~ = I~ W~ + B~: exact multiply-accumulate in 64-bit. With
/// `checked`, accumulation runs in 128-bit and overflow raises NumericError
/// naming the layer.
void fxp_fc_forward(std::span<const int64_t> in, const Mat<int32_t>& w,
                    std::span<const int32_t> b, std::span<int64_t> out,
                    bool checked = false, const char* layer_name = "fc");

struct FxpLstmState {
  std::vector<int64_t> h;  // hidden, scaled by i_n
  std::vector<float> c;    // cell, always unscaled float

  FxpLstmState() = default;
  explicit FxpLstmState(size_t units) : h(units, 0), c(units, 0.0f) {}
  void reset() {
    std::fill(h.begin(), h.end(), int64_t(0));
    std::fill(c.begin(), c.end(), 0.0f);
  }
};

// One quantized LSTM cell step. `in` must already be rescaled to this layer's
// input scale i_n. Gate pre-activations are accumulated in integer
// arithmetic, divided by w_n*i_n into float, activated, and the new hidden is
// carried at scale i_n, rounded back to integer:
//
//   M[k] = (I~ W~[k] + H~ U~[k] + B~[k]) / (w_n i_n)
//   C_t  = sigmoid(M[i]) * tanh(M[c]) + sigmoid(M[f]) * C_{t-1}
//   H~_t = round(i_n * (tanh(C_t) * sigmoid(M[o])))
//
// `gates` is caller scratch of size 4U.
void fxp_lstm_step(const quant::QuantizedLstmLayer& layer, quant::ScalePair s,
                   std::span<const int64_t> in, FxpLstmState& state,
                   std::span<int64_t> gates, const ActivationFns& act,
                   bool checked = false);

// Inference engine. Layers [0, quantized_prefix) run in integer math from the
// quantized model; layers behind the prefix run the float path from
// `float_weights`. The fully quantized engine is the prefix == layer_count
// special case, so search-time hybrids and production inference share one
// code path.
//
// All buffers are allocated at construction; step() allocates nothing.
class HybridEngine {
public:
  HybridEngine(const quant::QuantizedModel& qmodel, size_t quantized_prefix,
               const nn::Weights* float_weights, bool checked = false);

  void reset();

  /// Process one frame; returns the per-class prediction after the head.
  std::span<const float> step(std::span<const float> frame);

  size_t num_classes() const { return qmodel_->spec.num_classes; }

private:
  void check_accumulator_bounds() const;

  const quant::QuantizedModel* qmodel_;
  const nn::Weights* float_weights_;
  size_t prefix_;
  bool checked_;
  ActivationTable lut_sigmoid_, lut_tanh_;
  ActivationFns act_;

  // integer-side state and scratch
  std::vector<int64_t> int_in_, int_gates_;
  std::vector<FxpLstmState> fxp_state_;
  // float-side state and scratch
  std::vector<float> f_in_, f_cur_, f_gates_;
  nn::LstmState f_state_;
  std::vector<float> head_, cumsum_;
};

/// Fully integer engine over a quantized model.
class FxpEngine : public HybridEngine {
public:
  explicit FxpEngine(const quant::QuantizedModel& qmodel, bool checked = false)
      : HybridEngine(qmodel, qmodel.layer_count(), nullptr, checked) {}
};

/// Full-sequence quantized inference with rounded final counts.
nn::Prediction fxp_forward_sequence(const quant::QuantizedModel& qmodel,
                                    const data::Sequence& seq);

struct BenchReport {
  std::string platform;
  std::string model_id;
  uint64_t frames_processed = 0;
  int repetitions = 0;
  double wall_seconds = 0.0;
  double user_seconds = 0.0;
  double frames_per_second = 0.0;
  double realtime_instances = 0.0;  // throughput / 10 FPS sensor rate
};

/// Single-core throughput measurement: run `repetitions` passes over the
/// sequence, report frames/second from user time and how many 10 FPS sensor
/// instances that throughput would serve in real time.
template <class Engine>
BenchReport run_benchmark(Engine& engine, const data::Sequence& seq,
                          int repetitions, const std::string& model_id);

BenchReport benchmark_quantized(const quant::QuantizedModel& qmodel,
                                const data::Sequence& seq, int repetitions,
                                const std::string& model_id);
BenchReport benchmark_float(const nn::ModelSpec& spec, const nn::Weights& weights,
                            const data::Sequence& seq, int repetitions,
                            const std::string& model_id);

}  // namespace napc::fxp
