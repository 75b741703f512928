#pragma once

#include <cmath>
#include <span>
#include <string>

#include "napc/dataio.hpp"
#include "napc/errors.hpp"
#include "napc/model.hpp"

namespace napc::nn {

template <class T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

// One LSTM cell step. Gate pre-activations M = in * W + h * U + B are
// accumulated left to right; block order (i, f, c, o).
//
//   c' = sigmoid(M[i]) * tanh(M[c]) + sigmoid(M[f]) * c
//   h' = tanh(c') * sigmoid(M[o])
//
// `gates` is caller-provided scratch of size 4U. h and c are updated in
// place; h may not alias `in`.
template <class T>
void lstm_step(const LstmLayerT<T>& layer, const T* in, size_t in_dim,
               std::vector<T>& h, std::vector<T>& c, std::vector<T>& gates) {
  const size_t units = h.size();
  affine_rowvec(in, in_dim, layer.w, layer.b, gates.data());
  matvec_accum_rowvec(h.data(), units, layer.u, gates.data());
  for (size_t j = 0; j < units; ++j) {
    const T gi = sigmoid(gates[j]);
    const T gf = sigmoid(gates[units + j]);
    const T gc = std::tanh(gates[2 * units + j]);
    const T go = sigmoid(gates[3 * units + j]);
    c[j] = gi * gc + gf * c[j];
    h[j] = std::tanh(c[j]) * go;
  }
}

// Streaming float-precision inference: all scratch is allocated at
// construction, step() performs no allocation. One engine per sequence or
// sensor; weights are shared read-only.
template <class T>
class EngineT {
public:
  EngineT(const ModelSpec& spec, const WeightsT<T>& weights)
      : spec_(spec),
        weights_(&weights),
        state_(spec.lstm_layers, spec.lstm_units),
        fc_in_out_(spec.lstm_units, T(0)),
        layer_in_(spec.lstm_units, T(0)),
        gates_(4 * spec.lstm_units, T(0)),
        head_(spec.num_classes, T(0)),
        cumsum_(spec.num_classes, T(0)) {
    spec.validate();
  }

  void reset() {
    state_.reset();
    std::fill(cumsum_.begin(), cumsum_.end(), T(0));
  }

  /// Process one frame, return the per-class prediction at this frame.
  std::span<const T> step(std::span<const float> frame) {
    if (frame.size() != spec_.input_dim)
      throw DataError("frame dimension " + std::to_string(frame.size()) +
                      " does not match model input_dim " +
                      std::to_string(spec_.input_dim));
    const size_t u = spec_.lstm_units;
    for (size_t d = 0; d < spec_.input_dim; ++d) in_cast_[d] = T(frame[d]);
    affine_rowvec(in_cast_.data(), spec_.input_dim, weights_->fc_in_w,
                  weights_->fc_in_b, fc_in_out_.data());
    const T* cur = fc_in_out_.data();
    for (size_t l = 0; l < spec_.lstm_layers; ++l) {
      std::copy(cur, cur + u, layer_in_.begin());
      lstm_step(weights_->lstm[l], layer_in_.data(), u, state_.h[l], state_.c[l],
                gates_);
      cur = state_.h[l].data();
    }
    affine_rowvec(cur, u, weights_->fc_out_w, weights_->fc_out_b, head_.data());
    for (size_t cls = 0; cls < spec_.num_classes; ++cls) {
      T v = head_[cls];
      if (spec_.head.abs_activation) v = std::abs(v);
      if (spec_.head.cumsum)
        cumsum_[cls] += v;
      else
        cumsum_[cls] = v;
    }
    return {cumsum_.data(), spec_.num_classes};
  }

  const LstmStateT<T>& state() const { return state_; }

private:
  ModelSpec spec_;
  const WeightsT<T>* weights_;
  LstmStateT<T> state_;
  std::vector<T> in_cast_ = std::vector<T>(spec_.input_dim, T(0));
  std::vector<T> fc_in_out_;
  std::vector<T> layer_in_;
  std::vector<T> gates_;
  std::vector<T> head_;
  std::vector<T> cumsum_;
};

using Engine = EngineT<float>;

/// Full-sequence forward pass; per-frame outputs plus rounded final counts.
template <class T>
Prediction forward_sequence(const ModelSpec& spec, const WeightsT<T>& weights,
                            const data::Sequence& seq) {
  if (seq.input_dim != spec.input_dim)
    throw DataError("sequence '" + seq.id + "' dimension mismatch");
  EngineT<T> engine(spec, weights);
  const size_t frames = seq.frame_count();
  Prediction pred;
  pred.num_classes = spec.num_classes;
  pred.per_frame.resize(frames * spec.num_classes);
  for (size_t t = 0; t < frames; ++t) {
    const auto out = engine.step(seq.frame(t));
    for (size_t c = 0; c < spec.num_classes; ++c)
      pred.per_frame[t * spec.num_classes + c] = static_cast<float>(out[c]);
  }
  if (frames > 0) {
    std::vector<float> last(pred.per_frame.end() - spec.num_classes,
                            pred.per_frame.end());
    if (!all_finite(last))
      throw NumericError("non-finite prediction for sequence '" + seq.id + "'");
    pred.final_counts = round_counts(last);
  }
  return pred;
}

}  // namespace napc::nn
