#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "napc/errors.hpp"
#include "napc/forward.hpp"
#include "napc/model.hpp"
#include "napc/trainer.hpp"

// Backpropagation through time for the counting network, templated on the
// scalar type: training runs in float, the gradient-check oracle instantiates
// double. Gradients flow through the abs head (subgradient 0 at 0) and the
// cumulative sum.

namespace napc::train {

/// Corridor loss on one trajectory: final_weight * squared error at the last
/// frame plus corridor_weight * mean over frames of per-class hinge penalties
/// max(0, -p)^2 + max(0, p - label)^2.
template <class T>
T sequence_loss(std::span<const T> per_frame, std::span<const int64_t> labels,
                const LossConfig& cfg) {
  const size_t classes = labels.size();
  const size_t frames = per_frame.size() / classes;
  if (frames == 0) return T(0);
  T corridor = T(0);
  for (size_t t = 0; t < frames; ++t) {
    for (size_t c = 0; c < classes; ++c) {
      const T p = per_frame[t * classes + c];
      const T y = static_cast<T>(labels[c]);
      const T under = p < T(0) ? -p : T(0);
      const T over = p > y ? p - y : T(0);
      corridor += under * under + over * over;
    }
  }
  corridor /= static_cast<T>(frames);
  T final_term = T(0);
  for (size_t c = 0; c < classes; ++c) {
    const T diff =
        per_frame[(frames - 1) * classes + c] - static_cast<T>(labels[c]);
    final_term += diff * diff;
  }
  return static_cast<T>(cfg.final_weight) * final_term +
         static_cast<T>(cfg.corridor_weight) * corridor;
}

namespace detail {

template <class T>
struct ForwardTrace {
  std::vector<T> fc_in_out;                 // T x U
  std::vector<std::vector<T>> gates;        // per layer, T x 4U activated
  std::vector<std::vector<T>> cell;         // per layer, T x U
  std::vector<std::vector<T>> hidden;       // per layer, T x U
  std::vector<T> head_raw;                  // T x C before abs/cumsum
  std::vector<T> per_frame;                 // T x C after head
};

/// Forward pass keeping every intermediate needed by the backward sweep.
/// masks, when non-empty, hold one multiplicative mask of length U per layer,
/// applied to the layer output on its way up (never on the recurrent path).
template <class T>
void forward_trace(const nn::ModelSpec& spec, const nn::WeightsT<T>& w,
                   const data::Sequence& seq,
                   const std::vector<std::vector<T>>& masks,
                   ForwardTrace<T>& trace) {
  const size_t frames = seq.frame_count();
  const size_t u = spec.lstm_units;
  const size_t classes = spec.num_classes;

  trace.fc_in_out.assign(frames * u, T(0));
  trace.gates.assign(spec.lstm_layers, std::vector<T>(frames * 4 * u, T(0)));
  trace.cell.assign(spec.lstm_layers, std::vector<T>(frames * u, T(0)));
  trace.hidden.assign(spec.lstm_layers, std::vector<T>(frames * u, T(0)));
  trace.head_raw.assign(frames * classes, T(0));
  trace.per_frame.assign(frames * classes, T(0));

  std::vector<T> x(spec.input_dim);
  std::vector<T> layer_in(u);
  std::vector<T> pre(4 * u);
  std::vector<T> h_prev(u), c_prev(u);
  std::vector<T> cum(classes, T(0));

  for (size_t t = 0; t < frames; ++t) {
    const auto frame = seq.frame(t);
    for (size_t d = 0; d < spec.input_dim; ++d) x[d] = static_cast<T>(frame[d]);
    affine_rowvec(x.data(), spec.input_dim, w.fc_in_w, w.fc_in_b,
                  &trace.fc_in_out[t * u]);

    const T* below = &trace.fc_in_out[t * u];
    for (size_t l = 0; l < spec.lstm_layers; ++l) {
      for (size_t j = 0; j < u; ++j) layer_in[j] = below[j];
      if (l > 0 && !masks.empty())
        for (size_t j = 0; j < u; ++j) layer_in[j] *= masks[l - 1][j];

      if (t == 0) {
        std::fill(h_prev.begin(), h_prev.end(), T(0));
        std::fill(c_prev.begin(), c_prev.end(), T(0));
      } else {
        const T* hp = &trace.hidden[l][(t - 1) * u];
        const T* cp = &trace.cell[l][(t - 1) * u];
        std::copy(hp, hp + u, h_prev.begin());
        std::copy(cp, cp + u, c_prev.begin());
      }

      affine_rowvec(layer_in.data(), u, w.lstm[l].w, w.lstm[l].b, pre.data());
      matvec_accum_rowvec(h_prev.data(), u, w.lstm[l].u, pre.data());

      T* gates_t = &trace.gates[l][t * 4 * u];
      T* cell_t = &trace.cell[l][t * u];
      T* hidden_t = &trace.hidden[l][t * u];
      for (size_t j = 0; j < u; ++j) {
        const T gi = nn::sigmoid(pre[j]);
        const T gf = nn::sigmoid(pre[u + j]);
        const T gc = std::tanh(pre[2 * u + j]);
        const T go = nn::sigmoid(pre[3 * u + j]);
        gates_t[j] = gi;
        gates_t[u + j] = gf;
        gates_t[2 * u + j] = gc;
        gates_t[3 * u + j] = go;
        cell_t[j] = gi * gc + gf * c_prev[j];
        hidden_t[j] = std::tanh(cell_t[j]) * go;
      }
      below = hidden_t;
    }

    for (size_t j = 0; j < u; ++j) {
      layer_in[j] = below[j];
      if (!masks.empty()) layer_in[j] *= masks[spec.lstm_layers - 1][j];
    }
    affine_rowvec(layer_in.data(), u, w.fc_out_w, w.fc_out_b,
                  &trace.head_raw[t * classes]);
    for (size_t c = 0; c < classes; ++c) {
      T v = trace.head_raw[t * classes + c];
      if (spec.head.abs_activation) v = v < T(0) ? -v : v;
      if (spec.head.cumsum)
        cum[c] += v;
      else
        cum[c] = v;
      trace.per_frame[t * classes + c] = cum[c];
    }
  }
}

}  // namespace detail

/// Loss and exact parameter gradients for one sequence, accumulated (+=) into
/// `grad`. `masks` follows forward_trace's convention; pass {} for none.
template <class T>
T bptt_sequence(const nn::ModelSpec& spec, const nn::WeightsT<T>& w,
                const data::Sequence& seq,
                const std::vector<std::vector<T>>& masks, const LossConfig& cfg,
                nn::WeightsT<T>& grad) {
  const size_t frames = seq.frame_count();
  const size_t u = spec.lstm_units;
  const size_t classes = spec.num_classes;
  if (seq.labels.size() != classes)
    throw DataError("sequence '" + seq.id + "' label count mismatch");

  detail::ForwardTrace<T> trace;
  detail::forward_trace(spec, w, seq, masks, trace);
  const T loss = sequence_loss<T>(trace.per_frame, seq.labels, cfg);

  // d loss / d p_t
  std::vector<T> dp(frames * classes, T(0));
  const T inv_frames = T(1) / static_cast<T>(frames);
  for (size_t t = 0; t < frames; ++t) {
    for (size_t c = 0; c < classes; ++c) {
      const T p = trace.per_frame[t * classes + c];
      const T y = static_cast<T>(seq.labels[c]);
      T g = T(0);
      if (p < T(0)) g += T(2) * p;  // -2*max(0,-p)
      if (p > y) g += T(2) * (p - y);
      g *= static_cast<T>(cfg.corridor_weight) * inv_frames;
      if (t == frames - 1)
        g += T(2) * static_cast<T>(cfg.final_weight) * (p - y);
      dp[t * classes + c] = g;
    }
  }

  // Head backward: cumsum -> suffix sums; abs -> sign gate.
  std::vector<T> dz(frames * classes, T(0));
  if (spec.head.cumsum) {
    std::vector<T> acc(classes, T(0));
    for (size_t t = frames; t-- > 0;) {
      for (size_t c = 0; c < classes; ++c) {
        acc[c] += dp[t * classes + c];
        dz[t * classes + c] = acc[c];
      }
    }
  } else {
    dz = dp;
  }

  std::vector<T> dy(classes);
  std::vector<T> dh_above(frames * u, T(0));  // gradient w.r.t. masked output of top layer
  std::vector<T> masked_in(u);
  for (size_t t = 0; t < frames; ++t) {
    for (size_t c = 0; c < classes; ++c) {
      T g = dz[t * classes + c];
      if (spec.head.abs_activation) {
        const T raw = trace.head_raw[t * classes + c];
        g = raw > T(0) ? g : (raw < T(0) ? -g : T(0));
      }
      dy[c] = g;
    }
    const T* top = &trace.hidden[spec.lstm_layers - 1][t * u];
    for (size_t j = 0; j < u; ++j) {
      masked_in[j] = top[j];
      if (!masks.empty()) masked_in[j] *= masks[spec.lstm_layers - 1][j];
    }
    for (size_t j = 0; j < u; ++j) {
      T acc = T(0);
      for (size_t c = 0; c < classes; ++c) {
        grad.fc_out_w(j, c) += masked_in[j] * dy[c];
        acc += dy[c] * w.fc_out_w(j, c);
      }
      dh_above[t * u + j] = acc;
    }
    for (size_t c = 0; c < classes; ++c) grad.fc_out_b[c] += dy[c];
  }

  // LSTM layers, top to bottom; within a layer, time runs backward.
  std::vector<T> dh_rec(u), dc_rec(u), dm(4 * u), dh_total(u);
  std::vector<T> dbelow(frames * u, T(0));
  std::vector<T> layer_in(u);
  for (size_t l = spec.lstm_layers; l-- > 0;) {
    std::fill(dh_rec.begin(), dh_rec.end(), T(0));
    std::fill(dc_rec.begin(), dc_rec.end(), T(0));
    std::fill(dbelow.begin(), dbelow.end(), T(0));
    const auto& lw = w.lstm[l];
    auto& lg = grad.lstm[l];

    for (size_t t = frames; t-- > 0;) {
      const T* gates_t = &trace.gates[l][t * 4 * u];
      const T* cell_t = &trace.cell[l][t * u];
      for (size_t j = 0; j < u; ++j) {
        // dh_above is the gradient w.r.t. this layer's masked output; the
        // mask gates only the upward connection, never the recurrent one.
        T from_above = dh_above[t * u + j];
        if (!masks.empty()) from_above *= masks[l][j];
        dh_total[j] = from_above + dh_rec[j];
      }
      for (size_t j = 0; j < u; ++j) {
        const T gi = gates_t[j];
        const T gf = gates_t[u + j];
        const T gc = gates_t[2 * u + j];
        const T go = gates_t[3 * u + j];
        const T tc = std::tanh(cell_t[j]);
        const T do_ = dh_total[j] * tc;
        T dc = dh_total[j] * go * (T(1) - tc * tc) + dc_rec[j];
        const T c_prev = t == 0 ? T(0) : trace.cell[l][(t - 1) * u + j];
        const T di = dc * gc;
        const T dg = dc * gi;
        const T df = dc * c_prev;
        dc_rec[j] = dc * gf;
        dm[j] = di * gi * (T(1) - gi);
        dm[u + j] = df * gf * (T(1) - gf);
        dm[2 * u + j] = dg * (T(1) - gc * gc);
        dm[3 * u + j] = do_ * go * (T(1) - go);
      }

      // input to this layer at time t (masked copy of the layer below)
      const T* below = l == 0 ? &trace.fc_in_out[t * u]
                              : &trace.hidden[l - 1][t * u];
      for (size_t j = 0; j < u; ++j) {
        layer_in[j] = below[j];
        if (l > 0 && !masks.empty()) layer_in[j] *= masks[l - 1][j];
      }

      for (size_t j = 0; j < u; ++j) {
        const T x = layer_in[j];
        for (size_t g = 0; g < 4 * u; ++g) lg.w(j, g) += x * dm[g];
      }
      if (t > 0) {
        const T* h_prev = &trace.hidden[l][(t - 1) * u];
        for (size_t j = 0; j < u; ++j) {
          const T x = h_prev[j];
          for (size_t g = 0; g < 4 * u; ++g) lg.u(j, g) += x * dm[g];
        }
      }
      for (size_t g = 0; g < 4 * u; ++g) lg.b[g] += dm[g];

      // propagate to the input of this layer and to h_{t-1}
      for (size_t j = 0; j < u; ++j) {
        T acc = T(0);
        for (size_t g = 0; g < 4 * u; ++g) acc += dm[g] * lw.w(j, g);
        dbelow[t * u + j] = acc;
      }
      for (size_t j = 0; j < u; ++j) {
        T acc = T(0);
        for (size_t g = 0; g < 4 * u; ++g) acc += dm[g] * lw.u(j, g);
        dh_rec[j] = acc;
      }
    }
    std::swap(dh_above, dbelow);  // dh_above now holds gradients for layer l-1 outputs (pre-mask)
  }

  // dh_above holds d loss / d fc_in output
  std::vector<T> x(spec.input_dim);
  for (size_t t = 0; t < frames; ++t) {
    const auto frame = seq.frame(t);
    for (size_t d = 0; d < spec.input_dim; ++d) x[d] = static_cast<T>(frame[d]);
    const T* da = &dh_above[t * u];
    for (size_t d = 0; d < spec.input_dim; ++d) {
      const T xd = x[d];
      for (size_t j = 0; j < u; ++j) grad.fc_in_w(d, j) += xd * da[j];
    }
    for (size_t j = 0; j < u; ++j) grad.fc_in_b[j] += da[j];
  }

  return loss;
}

/// Mean gradients over a batch of sequences, without dropout. Returns the
/// gradient set; mean loss via out param.
template <class T>
nn::WeightsT<T> bptt_gradients(const nn::ModelSpec& spec,
                               const nn::WeightsT<T>& weights,
                               std::span<const data::Sequence> batch,
                               const LossConfig& cfg, T* mean_loss = nullptr) {
  nn::WeightsT<T> grad = nn::make_weights<T>(spec);
  T total = T(0);
  for (const auto& seq : batch)
    total += bptt_sequence<T>(spec, weights, seq, {}, cfg, grad);
  const T scale = batch.empty() ? T(0) : T(1) / static_cast<T>(batch.size());
  grad.for_each_param([scale](std::vector<T>& v) {
    for (T& x : v) x *= scale;
  });
  bool finite = true;
  grad.for_each_param([&finite](const std::vector<T>& v) {
    if (!all_finite(v)) finite = false;
  });
  if (!finite) throw NumericError("non-finite gradients");
  if (mean_loss) *mean_loss = batch.empty() ? T(0) : total * scale;
  return grad;
}

}  // namespace napc::train
