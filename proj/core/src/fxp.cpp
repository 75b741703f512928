#include "napc/fxp.hpp"

#include <sys/resource.h>
#include <sys/utsname.h>

#include <chrono>
#include <cmath>

#include "napc/errors.hpp"
#include "napc/forward.hpp"

namespace napc::fxp {

int64_t rescale_pow2(int64_t v, int shift) {
  if (shift >= 0) return v << shift;
  const int k = -shift;
  const int64_t mag = v < 0 ? -v : v;
  const int64_t r = (mag + (int64_t(1) << (k - 1))) >> k;
  return v < 0 ? -r : r;
}

int64_t round_to_int(double x) {
  return static_cast<int64_t>(std::round(x));  // half away from zero
}

ActivationTable ActivationTable::build(Fn fn, size_t resolution, double clamp) {
  ActivationTable t;
  t.clamp = clamp;
  t.resolution = resolution;
  t.values.resize(resolution);
  auto exact = [fn](double x) {
    return fn == Fn::kSigmoid ? 1.0 / (1.0 + std::exp(-x)) : std::tanh(x);
  };
  const double step = 2.0 * clamp / static_cast<double>(resolution - 1);
  for (size_t j = 0; j < resolution; ++j)
    t.values[j] = static_cast<float>(exact(-clamp + step * static_cast<double>(j)));
  // Measure the worst interpolation/saturation error on a denser grid.
  double max_err = 0.0;
  const size_t probes = resolution * 8;
  const double lo = -clamp - 2.0, hi = clamp + 2.0;
  for (size_t j = 0; j <= probes; ++j) {
    const double x = lo + (hi - lo) * static_cast<double>(j) / probes;
    const double err =
        std::abs(static_cast<double>(t.eval(static_cast<float>(x))) - exact(x));
    if (err > max_err) max_err = err;
  }
  t.max_error = max_err;
  return t;
}

ActivationTable ActivationTable::from_values(std::vector<float> values,
                                             double clamp) {
  ActivationTable t;
  t.clamp = clamp;
  t.resolution = values.size();
  t.values = std::move(values);
  return t;
}

namespace {

constexpr double kAccumulatorLimit = 4.611686018427387904e18;  // 2^62

template <bool Checked>
void affine_impl(std::span<const int64_t> in, const Mat<int32_t>& w,
                 std::span<const int32_t> b, std::span<int64_t> out,
                 const char* layer_name) {
  const size_t out_dim = w.cols;
  if constexpr (Checked) {
    for (size_t j = 0; j < out_dim; ++j) {
      __int128 acc = b[j];
      for (size_t d = 0; d < in.size(); ++d)
        acc += static_cast<__int128>(in[d]) * w.data[d * out_dim + j];
      if (acc > INT64_MAX || acc < INT64_MIN)
        throw NumericError(std::string("accumulator overflow in layer ") +
                           layer_name);
      out[j] = static_cast<int64_t>(acc);
    }
  } else {
    for (size_t j = 0; j < out_dim; ++j) out[j] = b[j];
    for (size_t d = 0; d < in.size(); ++d) {
      const int64_t x = in[d];
      const int32_t* wrow = &w.data[d * out_dim];
      for (size_t j = 0; j < out_dim; ++j) out[j] += x * wrow[j];
    }
  }
}

template <bool Checked>
void recurrent_accum_impl(std::span<const int64_t> h, const Mat<int32_t>& u_mat,
                          std::span<int64_t> gates, const char* layer_name) {
  const size_t out_dim = u_mat.cols;
  if constexpr (Checked) {
    for (size_t g = 0; g < out_dim; ++g) {
      __int128 acc = gates[g];
      for (size_t uu = 0; uu < h.size(); ++uu)
        acc += static_cast<__int128>(h[uu]) * u_mat.data[uu * out_dim + g];
      if (acc > INT64_MAX || acc < INT64_MIN)
        throw NumericError(std::string("accumulator overflow in layer ") +
                           layer_name);
      gates[g] = static_cast<int64_t>(acc);
    }
  } else {
    for (size_t uu = 0; uu < h.size(); ++uu) {
      const int64_t x = h[uu];
      const int32_t* urow = &u_mat.data[uu * out_dim];
      for (size_t g = 0; g < out_dim; ++g) gates[g] += x * urow[g];
    }
  }
}

double abs_row_sum_max(const Mat<int32_t>& w, std::span<const int32_t> b,
                       double in_bound, double h_bound, const Mat<int32_t>* u) {
  // max over outputs j of sum_d |w(d,j)|*in_bound (+ sum_u |u|*h_bound) + |b_j|
  double worst = 0.0;
  for (size_t j = 0; j < w.cols; ++j) {
    double acc = std::abs(static_cast<double>(b[j]));
    for (size_t d = 0; d < w.rows; ++d)
      acc += std::abs(static_cast<double>(w(d, j))) * in_bound;
    if (u)
      for (size_t d = 0; d < u->rows; ++d)
        acc += std::abs(static_cast<double>((*u)(d, j))) * h_bound;
    if (acc > worst) worst = acc;
  }
  return worst;
}

}  // namespace

void fxp_fc_forward(std::span<const int64_t> in, const Mat<int32_t>& w,
                    std::span<const int32_t> b, std::span<int64_t> out,
                    bool checked, const char* layer_name) {
  if (checked)
    affine_impl<true>(in, w, b, out, layer_name);
  else
    affine_impl<false>(in, w, b, out, layer_name);
}

void fxp_lstm_step(const quant::QuantizedLstmLayer& layer, quant::ScalePair s,
                   std::span<const int64_t> in, FxpLstmState& state,
                   std::span<int64_t> gates, const ActivationFns& act,
                   bool checked) {
  const size_t units = state.h.size();
  if (checked) {
    affine_impl<true>(in, layer.w, layer.b, gates, "lstm");
    recurrent_accum_impl<true>({state.h.data(), units}, layer.u, gates, "lstm");
  } else {
    affine_impl<false>(in, layer.w, layer.b, gates, "lstm");
    recurrent_accum_impl<false>({state.h.data(), units}, layer.u, gates, "lstm");
  }
  const int de = s.w_exp + s.i_exp;
  for (size_t j = 0; j < units; ++j) {
    const float mi = static_cast<float>(
        std::ldexp(static_cast<double>(gates[j]), -de));
    const float mf = static_cast<float>(
        std::ldexp(static_cast<double>(gates[units + j]), -de));
    const float mc = static_cast<float>(
        std::ldexp(static_cast<double>(gates[2 * units + j]), -de));
    const float mo = static_cast<float>(
        std::ldexp(static_cast<double>(gates[3 * units + j]), -de));
    const float c_new =
        act.sigmoid(mi) * act.tanh(mc) + act.sigmoid(mf) * state.c[j];
    state.c[j] = c_new;
    const float h_val = act.tanh(c_new) * act.sigmoid(mo);
    state.h[j] = round_to_int(std::ldexp(static_cast<double>(h_val), s.i_exp));
  }
}

HybridEngine::HybridEngine(const quant::QuantizedModel& qmodel,
                           size_t quantized_prefix,
                           const nn::Weights* float_weights, bool checked)
    : qmodel_(&qmodel),
      float_weights_(float_weights),
      prefix_(quantized_prefix),
      checked_(checked),
      f_state_(qmodel.spec.lstm_layers, qmodel.spec.lstm_units) {
  const nn::ModelSpec& spec = qmodel.spec;
  spec.validate();
  if (prefix_ > qmodel.layer_count())
    throw DataError("quantized prefix exceeds layer count");
  if (prefix_ < qmodel.layer_count() && float_weights_ == nullptr)
    throw DataError("hybrid engine needs float weights for the suffix");
  if (qmodel.scales.size() < prefix_)
    throw DataError("quantized model is missing scale entries");

  const size_t u = spec.lstm_units;
  const size_t width = std::max({spec.input_dim, u, spec.num_classes});
  int_in_.assign(width, 0);
  int_gates_.assign(std::max(4 * u, spec.num_classes), 0);
  fxp_state_.assign(spec.lstm_layers, FxpLstmState(u));
  f_in_.assign(width, 0.0f);
  f_cur_.assign(width, 0.0f);
  f_gates_.assign(4 * u, 0.0f);
  head_.assign(spec.num_classes, 0.0f);
  cumsum_.assign(spec.num_classes, 0.0f);

  if (qmodel.activation_mode == quant::ActivationMode::kLut && prefix_ > 0) {
    if (!qmodel.lut_sigmoid.empty()) {
      lut_sigmoid_ =
          ActivationTable::from_values(qmodel.lut_sigmoid, qmodel.lut_clamp);
      lut_tanh_ = ActivationTable::from_values(qmodel.lut_tanh, qmodel.lut_clamp);
    } else {
      lut_sigmoid_ = ActivationTable::build(ActivationTable::Fn::kSigmoid,
                                            qmodel.lut_resolution, qmodel.lut_clamp);
      lut_tanh_ = ActivationTable::build(ActivationTable::Fn::kTanh,
                                         qmodel.lut_resolution, qmodel.lut_clamp);
    }
    act_.sigmoid_lut = &lut_sigmoid_;
    act_.tanh_lut = &lut_tanh_;
  }
  check_accumulator_bounds();
}

void HybridEngine::check_accumulator_bounds() const {
  const nn::ModelSpec& spec = qmodel_->spec;
  double bound = 0.0;  // |value| bound of the current integer representation
  int o_exp = 0;       // its scale exponent
  for (size_t k = 0; k < prefix_; ++k) {
    const quant::ScalePair s = qmodel_->scales[k];
    const std::string name = quant::QuantizedModel::layer_name(k, spec.lstm_layers);
    double acc_bound = 0.0;
    if (k == 0) {
      const double in_bound =
          std::abs(static_cast<double>(qmodel_->input_bound)) *
              std::ldexp(1.0, s.i_exp) +
          0.5;
      acc_bound = abs_row_sum_max(qmodel_->fc_in_w, qmodel_->fc_in_b, in_bound,
                                  0.0, nullptr);
      bound = acc_bound;
    } else if (k <= spec.lstm_layers) {
      const double in_bound = bound * std::ldexp(1.0, s.i_exp - o_exp) + 0.5;
      const double h_bound = std::ldexp(1.0, s.i_exp) + 0.5;  // |tanh*sigmoid| <= 1
      const auto& layer = qmodel_->lstm[k - 1];
      acc_bound = abs_row_sum_max(layer.w, layer.b, in_bound, h_bound, &layer.u);
      bound = h_bound;
    } else {
      const double in_bound = bound * std::ldexp(1.0, s.i_exp - o_exp) + 0.5;
      acc_bound = abs_row_sum_max(qmodel_->fc_out_w, qmodel_->fc_out_b, in_bound,
                                  0.0, nullptr);
      bound = acc_bound;
    }
    if (acc_bound >= kAccumulatorLimit)
      throw NumericError("layer " + name +
                         " cannot be proven overflow-free in 64-bit accumulators");
    o_exp = qmodel_->out_scale_exp(k);
  }
}

void HybridEngine::reset() {
  for (auto& s : fxp_state_) s.reset();
  f_state_.reset();
  std::fill(cumsum_.begin(), cumsum_.end(), 0.0f);
}

std::span<const float> HybridEngine::step(std::span<const float> frame) {
  const nn::ModelSpec& spec = qmodel_->spec;
  if (frame.size() != spec.input_dim)
    throw DataError("frame dimension does not match model input_dim");
  const size_t u = spec.lstm_units;
  const size_t layers = qmodel_->layer_count();

  int o_exp = 0;        // scale exponent of int_in_ while on the integer side
  bool on_int = false;  // whether the current representation is integer
  size_t cur_dim = spec.input_dim;

  for (size_t k = 0; k < layers; ++k) {
    const bool quantized = k < prefix_;

    // leaving the quantized prefix de-scales the representation once
    if (!quantized && on_int) {
      for (size_t d = 0; d < cur_dim; ++d)
        f_cur_[d] = static_cast<float>(
            std::ldexp(static_cast<double>(int_in_[d]), -o_exp));
      on_int = false;
    }

    if (k == 0) {
      if (quantized) {
        const quant::ScalePair s = qmodel_->scales[0];
        // quantize the raw input: I~ = round(x * i_1), o_0 = 1
        for (size_t d = 0; d < spec.input_dim; ++d)
          int_in_[d] = round_to_int(
              std::ldexp(static_cast<double>(frame[d]), s.i_exp));
        fxp_fc_forward({int_in_.data(), spec.input_dim}, qmodel_->fc_in_w,
                       qmodel_->fc_in_b, {int_gates_.data(), u}, checked_,
                       "fc_in");
        std::copy_n(int_gates_.begin(), u, int_in_.begin());
        o_exp = qmodel_->out_scale_exp(0);
        on_int = true;
      } else {
        for (size_t d = 0; d < spec.input_dim; ++d) f_in_[d] = frame[d];
        affine_rowvec(f_in_.data(), spec.input_dim, float_weights_->fc_in_w,
                      float_weights_->fc_in_b, f_cur_.data());
      }
      cur_dim = u;
    } else if (k <= spec.lstm_layers) {
      const size_t l = k - 1;
      if (quantized) {
        const quant::ScalePair s = qmodel_->scales[k];
        const int shift = s.i_exp - o_exp;
        for (size_t d = 0; d < u; ++d)
          int_in_[d] = rescale_pow2(int_in_[d], shift);
        fxp_lstm_step(qmodel_->lstm[l], s, {int_in_.data(), u}, fxp_state_[l],
                      {int_gates_.data(), 4 * u}, act_, checked_);
        std::copy_n(fxp_state_[l].h.begin(), u, int_in_.begin());
        o_exp = qmodel_->out_scale_exp(k);
      } else {
        std::copy_n(f_cur_.begin(), u, f_in_.begin());
        nn::lstm_step(float_weights_->lstm[l], f_in_.data(), u, f_state_.h[l],
                      f_state_.c[l], f_gates_);
        std::copy_n(f_state_.h[l].begin(), u, f_cur_.begin());
      }
      cur_dim = u;
    } else {
      if (quantized) {
        const quant::ScalePair s = qmodel_->scales[k];
        const int shift = s.i_exp - o_exp;
        for (size_t d = 0; d < u; ++d)
          int_in_[d] = rescale_pow2(int_in_[d], shift);
        fxp_fc_forward({int_in_.data(), u}, qmodel_->fc_out_w, qmodel_->fc_out_b,
                       {int_gates_.data(), spec.num_classes}, checked_,
                       "fc_out");
        const int de = qmodel_->out_scale_exp(k);
        for (size_t c = 0; c < spec.num_classes; ++c)
          head_[c] = static_cast<float>(
              std::ldexp(static_cast<double>(int_gates_[c]), -de));
      } else {
        affine_rowvec(f_cur_.data(), u, float_weights_->fc_out_w,
                      float_weights_->fc_out_b, head_.data());
      }
      cur_dim = spec.num_classes;
    }
  }

  for (size_t c = 0; c < spec.num_classes; ++c) {
    float v = head_[c];
    if (spec.head.abs_activation) v = std::abs(v);
    if (spec.head.cumsum)
      cumsum_[c] += v;
    else
      cumsum_[c] = v;
  }
  return {cumsum_.data(), spec.num_classes};
}

nn::Prediction fxp_forward_sequence(const quant::QuantizedModel& qmodel,
                                    const data::Sequence& seq) {
  if (seq.input_dim != qmodel.spec.input_dim)
    throw DataError("sequence '" + seq.id + "' dimension mismatch");
  FxpEngine engine(qmodel);
  const size_t frames = seq.frame_count();
  nn::Prediction pred;
  pred.num_classes = qmodel.spec.num_classes;
  pred.per_frame.resize(frames * pred.num_classes);
  for (size_t t = 0; t < frames; ++t) {
    const auto out = engine.step(seq.frame(t));
    for (size_t c = 0; c < pred.num_classes; ++c)
      pred.per_frame[t * pred.num_classes + c] = out[c];
  }
  if (frames > 0) {
    std::vector<float> last(pred.per_frame.end() - pred.num_classes,
                            pred.per_frame.end());
    pred.final_counts = nn::round_counts(last);
  }
  return pred;
}

namespace {

double user_seconds_now() {
  rusage ru{};
  getrusage(RUSAGE_SELF, &ru);
  return static_cast<double>(ru.ru_utime.tv_sec) +
         static_cast<double>(ru.ru_utime.tv_usec) * 1e-6;
}

std::string platform_string() {
  utsname u{};
  if (uname(&u) != 0) return "unknown";
  return std::string(u.sysname) + " " + u.release + " " + u.machine;
}

}  // namespace

template <class Engine>
BenchReport run_benchmark(Engine& engine, const data::Sequence& seq,
                          int repetitions, const std::string& model_id) {
  if (repetitions < 1) throw DataError("repetitions must be >= 1");
  BenchReport report;
  report.platform = platform_string();
  report.model_id = model_id;
  report.repetitions = repetitions;

  const size_t frames = seq.frame_count();
  const auto wall0 = std::chrono::steady_clock::now();
  const double user0 = user_seconds_now();
  float sink = 0.0f;
  for (int r = 0; r < repetitions; ++r) {
    engine.reset();
    for (size_t t = 0; t < frames; ++t) {
      const auto out = engine.step(seq.frame(t));
      sink += out[0];
    }
  }
  const double user1 = user_seconds_now();
  const auto wall1 = std::chrono::steady_clock::now();

  report.frames_processed = static_cast<uint64_t>(frames) * repetitions;
  report.wall_seconds = std::chrono::duration<double>(wall1 - wall0).count();
  report.user_seconds = user1 - user0;
  const double t = report.user_seconds > 0 ? report.user_seconds
                                           : std::max(report.wall_seconds, 1e-9);
  report.frames_per_second = static_cast<double>(report.frames_processed) / t;
  report.realtime_instances = report.frames_per_second / 10.0;
  // keep `sink` alive so the loop is not optimized away
  if (!std::isfinite(sink)) report.model_id += "";
  return report;
}

template BenchReport run_benchmark<HybridEngine>(HybridEngine&,
                                                 const data::Sequence&, int,
                                                 const std::string&);
template BenchReport run_benchmark<nn::Engine>(nn::Engine&,
                                               const data::Sequence&, int,
                                               const std::string&);

BenchReport benchmark_quantized(const quant::QuantizedModel& qmodel,
                                const data::Sequence& seq, int repetitions,
                                const std::string& model_id) {
  FxpEngine engine(qmodel);
  return run_benchmark(engine, seq, repetitions, model_id);
}

BenchReport benchmark_float(const nn::ModelSpec& spec, const nn::Weights& weights,
                            const data::Sequence& seq, int repetitions,
                            const std::string& model_id) {
  nn::Engine engine(spec, weights);
  return run_benchmark(engine, seq, repetitions, model_id);
}

}  // namespace napc::fxp
