#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "napc/tensor.hpp"

namespace napc::nn {

struct HeadSpec {
  bool abs_activation = true;
  bool cumsum = true;
};

// Counting network: input FC -> L stacked LSTM layers -> output FC -> optional
// elementwise abs -> optional running sum over time.
struct ModelSpec {
  size_t input_dim = 0;    // D
  size_t lstm_layers = 1;  // L
  size_t lstm_units = 1;   // U
  size_t num_classes = 2;  // C
  HeadSpec head;

  void validate() const;
  bool operator==(const ModelSpec&) const = default;
};

// Gate block order in all 4U-wide LSTM tensors is (i, f, c, o):
// input gate, forget gate, cell candidate, output gate.
template <class T>
struct LstmLayerT {
  Mat<T> w;             // U_in x 4U, input kernel
  Mat<T> u;             // U x 4U, recurrent kernel
  std::vector<T> b;     // 4U
};

template <class T>
struct WeightsT {
  Mat<T> fc_in_w;           // D x U
  std::vector<T> fc_in_b;   // U
  std::vector<LstmLayerT<T>> lstm;
  Mat<T> fc_out_w;          // U x C
  std::vector<T> fc_out_b;  // C

  template <class U>
  WeightsT<U> cast() const {
    WeightsT<U> out;
    out.fc_in_w = fc_in_w.template cast<U>();
    out.fc_in_b.assign(fc_in_b.begin(), fc_in_b.end());
    for (const auto& l : lstm) {
      LstmLayerT<U> lu;
      lu.w = l.w.template cast<U>();
      lu.u = l.u.template cast<U>();
      lu.b.assign(l.b.begin(), l.b.end());
      out.lstm.push_back(std::move(lu));
    }
    out.fc_out_w = fc_out_w.template cast<U>();
    out.fc_out_b.assign(fc_out_b.begin(), fc_out_b.end());
    return out;
  }

  /// Parameters in storage order: fc_in.W, fc_in.B, per layer (W, U, B),
  /// fc_out.W, fc_out.B. Visitor receives contiguous spans.
  template <class F>
  void for_each_param(F&& f) {
    f(fc_in_w.data);
    f(fc_in_b);
    for (auto& l : lstm) {
      f(l.w.data);
      f(l.u.data);
      f(l.b);
    }
    f(fc_out_w.data);
    f(fc_out_b);
  }
  template <class F>
  void for_each_param(F&& f) const {
    f(fc_in_w.data);
    f(fc_in_b);
    for (const auto& l : lstm) {
      f(l.w.data);
      f(l.u.data);
      f(l.b);
    }
    f(fc_out_w.data);
    f(fc_out_b);
  }

  size_t param_count() const {
    size_t n = 0;
    for_each_param([&n](const auto& v) { n += v.size(); });
    return n;
  }
};

using Weights = WeightsT<float>;

template <class T>
struct LstmStateT {
  // Per layer: hidden and cell vectors, zeroed at sequence start.
  std::vector<std::vector<T>> h;
  std::vector<std::vector<T>> c;

  LstmStateT() = default;
  LstmStateT(size_t layers, size_t units)
      : h(layers, std::vector<T>(units, T(0))),
        c(layers, std::vector<T>(units, T(0))) {}

  void reset() {
    for (auto& v : h) std::fill(v.begin(), v.end(), T(0));
    for (auto& v : c) std::fill(v.begin(), v.end(), T(0));
  }
};

using LstmState = LstmStateT<float>;

struct Prediction {
  size_t num_classes = 0;
  std::vector<float> per_frame;   // T x C cumulative counts
  std::vector<int64_t> final_counts;  // round(per_frame[T-1])

  size_t frame_count() const {
    return num_classes ? per_frame.size() / num_classes : 0;
  }
  const float* frame(size_t t) const { return per_frame.data() + t * num_classes; }
};

/// Allocate weight tensors shaped for `spec`, zero-filled.
template <class T>
WeightsT<T> make_weights(const ModelSpec& spec) {
  WeightsT<T> w;
  w.fc_in_w = Mat<T>(spec.input_dim, spec.lstm_units);
  w.fc_in_b.assign(spec.lstm_units, T(0));
  w.lstm.resize(spec.lstm_layers);
  for (auto& l : w.lstm) {
    l.w = Mat<T>(spec.lstm_units, 4 * spec.lstm_units);
    l.u = Mat<T>(spec.lstm_units, 4 * spec.lstm_units);
    l.b.assign(4 * spec.lstm_units, T(0));
  }
  w.fc_out_w = Mat<T>(spec.lstm_units, spec.num_classes);
  w.fc_out_b.assign(spec.num_classes, T(0));
  return w;
}

/// Deterministic initialization: kernels uniform in
/// +-sqrt(6 / (fan_in + fan_out)), biases zero except forget-gate bias +1.
/// Fill order matches WeightsT::for_each_param. Pure in (spec, weights_seed).
Weights init_weights(const ModelSpec& spec, uint64_t weights_seed);

/// Round half away from zero, elementwise.
std::vector<int64_t> round_counts(const std::vector<float>& last_frame);

/// 64-bit fingerprint over all parameter bytes in storage order.
uint64_t weights_fingerprint(const Weights& weights);

}  // namespace napc::nn
