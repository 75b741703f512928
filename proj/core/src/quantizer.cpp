#include "napc/quantizer.hpp"

#include <algorithm>
#include <cmath>

#include "napc/errors.hpp"
#include "napc/forward.hpp"
#include "napc/fxp.hpp"
#include "napc/rng.hpp"

namespace napc::quant {

void QuantizerConfig::validate() const {
  if (epsilon <= 0) throw DataError("quantizer epsilon must be > 0");
  if (max_iters < 1) throw DataError("max_iters must be >= 1");
  if (bit_width != 16 && bit_width != 32)
    throw DataError("bit_width must be 16 or 32");
  if (exp_min < 0 || exp_min > exp_max || exp_max > 30)
    throw DataError("scale exponent range must satisfy 0 <= min <= max <= 30");
  if (lut_resolution < 2) throw DataError("lut_resolution must be >= 2");
  if (lut_clamp <= 0) throw DataError("lut_clamp must be > 0");
}

CalibrationSet CalibrationSet::build(const nn::ModelSpec& spec,
                                     const nn::Weights& weights,
                                     std::vector<data::Sequence> sequences) {
  CalibrationSet calib;
  calib.sequences = std::move(sequences);
  calib.references.reserve(calib.sequences.size());
  for (const auto& seq : calib.sequences)
    calib.references.push_back(nn::forward_sequence(spec, weights, seq));
  return calib;
}

namespace {

int64_t int_limit(int bit_width) {
  return (int64_t(1) << (bit_width - 1)) - 1;
}

std::optional<std::vector<int32_t>> quantize_tensor(const std::vector<float>& v,
                                                    int exp, int64_t limit) {
  std::vector<int32_t> out(v.size());
  for (size_t idx = 0; idx < v.size(); ++idx) {
    const int64_t q = fxp::round_to_int(
        std::ldexp(static_cast<double>(v[idx]), exp));
    if (q > limit || q < -limit) return std::nullopt;
    out[idx] = static_cast<int32_t>(q);
  }
  return out;
}

}  // namespace

std::optional<ScaledFc> scale_fc(const MatF& w, const std::vector<float>& b,
                                 ScalePair s, int bit_width) {
  const int64_t limit = int_limit(bit_width);
  auto wq = quantize_tensor(w.data, s.w_exp, limit);
  if (!wq) return std::nullopt;
  auto bq = quantize_tensor(b, s.w_exp + s.i_exp, limit);
  if (!bq) return std::nullopt;
  ScaledFc out;
  out.w = Mat<int32_t>(w.rows, w.cols);
  out.w.data = std::move(*wq);
  out.b = std::move(*bq);
  return out;
}

std::optional<ScaledLstm> scale_lstm(const MatF& w, const MatF& u,
                                     const std::vector<float>& b, ScalePair s,
                                     int bit_width) {
  const int64_t limit = int_limit(bit_width);
  auto wq = quantize_tensor(w.data, s.w_exp, limit);
  if (!wq) return std::nullopt;
  auto uq = quantize_tensor(u.data, s.w_exp, limit);
  if (!uq) return std::nullopt;
  auto bq = quantize_tensor(b, s.w_exp + s.i_exp, limit);
  if (!bq) return std::nullopt;
  ScaledLstm out;
  out.w = Mat<int32_t>(w.rows, w.cols);
  out.w.data = std::move(*wq);
  out.u = Mat<int32_t>(u.rows, u.cols);
  out.u.data = std::move(*uq);
  out.b = std::move(*bq);
  return out;
}

namespace {

/// Largest |hybrid - reference| over every frame and class; aborts early once
/// the margin is exceeded.
bool hybrid_within_margin(const QuantizedModel& qm, size_t prefix,
                          const nn::Weights& float_weights,
                          const CalibrationSet& calib, double epsilon) {
  for (size_t sidx = 0; sidx < calib.sequences.size(); ++sidx) {
    const data::Sequence& seq = calib.sequences[sidx];
    const nn::Prediction& ref = calib.references[sidx];
    fxp::HybridEngine engine(qm, prefix, &float_weights);
    const size_t frames = seq.frame_count();
    const size_t classes = qm.spec.num_classes;
    for (size_t t = 0; t < frames; ++t) {
      const auto out = engine.step(seq.frame(t));
      const float* r = ref.frame(t);
      for (size_t c = 0; c < classes; ++c) {
        const double dev = std::abs(static_cast<double>(out[c]) -
                                    static_cast<double>(r[c]));
        if (!(dev <= epsilon)) return false;  // also catches NaN
      }
    }
  }
  return true;
}

float max_abs_input(const CalibrationSet& calib) {
  float bound = 0.0f;
  for (const auto& seq : calib.sequences)
    for (float v : seq.frames) bound = std::max(bound, std::abs(v));
  return bound > 0 ? bound : 1.0f;
}

}  // namespace

QuantizedModel quantize_model(const nn::Weights& template_weights,
                              const nn::ModelSpec& spec,
                              const CalibrationSet& calib,
                              const QuantizerConfig& config) {
  config.validate();
  spec.validate();
  if (calib.sequences.empty())
    throw DataError("quantization needs at least one calibration sequence");
  if (calib.references.size() != calib.sequences.size())
    throw DataError("calibration references missing; build the set first");

  QuantizedModel qm;
  qm.spec = spec;
  qm.bit_width = config.bit_width;
  qm.activation_mode = config.activation_mode;
  qm.lut_resolution = config.lut_resolution;
  qm.lut_clamp = config.lut_clamp;
  qm.input_bound = max_abs_input(calib);
  if (config.embed_luts || config.activation_mode == ActivationMode::kLut) {
    // Generated once from the exact 64-bit functions; embedding them in the
    // model file makes LUT-mode inference bit-exact across platforms.
    qm.lut_sigmoid = fxp::ActivationTable::build(
                         fxp::ActivationTable::Fn::kSigmoid, config.lut_resolution,
                         config.lut_clamp)
                         .values;
    qm.lut_tanh = fxp::ActivationTable::build(fxp::ActivationTable::Fn::kTanh,
                                              config.lut_resolution,
                                              config.lut_clamp)
                      .values;
  }

  qm.lstm.resize(spec.lstm_layers);
  const size_t layers = qm.layer_count();
  for (size_t k = 0; k < layers; ++k) {
    Rng rng = Rng::stream("quantize", config.seed, {k});
    bool accepted = false;
    for (int iter = 0; iter < config.max_iters && !accepted; ++iter) {
      const ScalePair s{
          static_cast<int>(rng.uniform_int(config.exp_min, config.exp_max)),
          static_cast<int>(rng.uniform_int(config.exp_min, config.exp_max))};

      if (k == 0) {
        auto scaled = scale_fc(template_weights.fc_in_w, template_weights.fc_in_b,
                               s, config.bit_width);
        if (!scaled) continue;
        qm.fc_in_w = std::move(scaled->w);
        qm.fc_in_b = std::move(scaled->b);
      } else if (k <= spec.lstm_layers) {
        const auto& layer = template_weights.lstm[k - 1];
        auto scaled = scale_lstm(layer.w, layer.u, layer.b, s, config.bit_width);
        if (!scaled) continue;
        qm.lstm[k - 1].w = std::move(scaled->w);
        qm.lstm[k - 1].u = std::move(scaled->u);
        qm.lstm[k - 1].b = std::move(scaled->b);
      } else {
        auto scaled = scale_fc(template_weights.fc_out_w,
                               template_weights.fc_out_b, s, config.bit_width);
        if (!scaled) continue;
        qm.fc_out_w = std::move(scaled->w);
        qm.fc_out_b = std::move(scaled->b);
      }

      if (qm.scales.size() == k)
        qm.scales.push_back(s);
      else
        qm.scales[k] = s;

      try {
        accepted = hybrid_within_margin(qm, k + 1, template_weights, calib,
                                        config.epsilon);
      } catch (const NumericError&) {
        accepted = false;  // unprovable accumulator bounds count as a rejection
      }
    }
    if (!accepted)
      throw QuantizeExhausted(
          "scale search exhausted " + std::to_string(config.max_iters) +
              " draws for layer " +
              QuantizedModel::layer_name(k, spec.lstm_layers),
          static_cast<int>(k));
  }
  return qm;
}

MarginReport verify_margin(const QuantizedModel& qmodel,
                           const CalibrationSet& calib, double epsilon) {
  MarginReport report;
  for (size_t sidx = 0; sidx < calib.sequences.size(); ++sidx) {
    const data::Sequence& seq = calib.sequences[sidx];
    const nn::Prediction& ref = calib.references[sidx];
    const nn::Prediction got = fxp::fxp_forward_sequence(qmodel, seq);
    double max_dev = 0.0;
    const size_t classes = qmodel.spec.num_classes;
    for (size_t t = 0; t < seq.frame_count(); ++t)
      for (size_t c = 0; c < classes; ++c)
        max_dev = std::max(max_dev,
                           std::abs(static_cast<double>(got.frame(t)[c]) -
                                    static_cast<double>(ref.frame(t)[c])));
    report.per_sequence.push_back({seq.id, max_dev});
    report.max_abs_dev = std::max(report.max_abs_dev, max_dev);
  }
  report.pass = report.max_abs_dev <= epsilon;
  return report;
}

}  // namespace napc::quant
