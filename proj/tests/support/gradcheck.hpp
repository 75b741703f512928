#pragma once

#include <algorithm>
#include <cmath>

#include "napc/bptt.hpp"
#include "support/test_support.hpp"

// Finite-difference gradient checking against the independent reference
// forward pass, everything in 64-bit.

namespace testsup {

/// Random small model in double.
inline RefModel random_ref_model(size_t d, size_t l, size_t u, size_t c,
                                 uint64_t seed, bool cumsum = true) {
  RefModel m;
  m.spec.input_dim = d;
  m.spec.lstm_layers = l;
  m.spec.lstm_units = u;
  m.spec.num_classes = c;
  m.spec.head.cumsum = cumsum;
  m.w = napc::nn::make_weights<double>(m.spec);
  napc::Rng rng = napc::Rng::stream("gradcheck.weights", seed);
  m.w.for_each_param([&rng](std::vector<double>& v) {
    for (double& x : v) x = rng.uniform(-0.6, 0.6);
  });
  return m;
}

/// Central finite differences of the reference loss; h = 1e-5.
inline napc::nn::WeightsT<double> fd_gradients(
    RefModel& m, const napc::data::Sequence& seq,
    const napc::train::LossConfig& cfg) {
  const double h = 1e-5;
  napc::nn::WeightsT<double> grad = napc::nn::make_weights<double>(m.spec);
  std::vector<std::vector<double>*> params, grads;
  m.w.for_each_param([&params](std::vector<double>& v) { params.push_back(&v); });
  grad.for_each_param([&grads](std::vector<double>& v) { grads.push_back(&v); });
  for (size_t p = 0; p < params.size(); ++p) {
    for (size_t k = 0; k < params[p]->size(); ++k) {
      double& x = (*params[p])[k];
      const double saved = x;
      x = saved + h;
      const double fp = ref_loss(m, seq, cfg);
      x = saved - h;
      const double fm = ref_loss(m, seq, cfg);
      x = saved;
      (*grads[p])[k] = (fp - fm) / (2.0 * h);
    }
  }
  return grad;
}

/// Largest guarded relative error between two gradient sets.
inline double max_rel_err(const napc::nn::WeightsT<double>& a,
                          const napc::nn::WeightsT<double>& b) {
  std::vector<const std::vector<double>*> av, bv;
  a.for_each_param([&av](const std::vector<double>& v) { av.push_back(&v); });
  b.for_each_param([&bv](const std::vector<double>& v) { bv.push_back(&v); });
  double worst = 0.0;
  for (size_t p = 0; p < av.size(); ++p)
    for (size_t k = 0; k < av[p]->size(); ++k) {
      const double ga = (*av[p])[k];
      const double gb = (*bv[p])[k];
      const double denom = std::max({std::abs(ga), std::abs(gb), 1e-4});
      worst = std::max(worst, std::abs(ga - gb) / denom);
    }
  return worst;
}

/// The abs head is non-differentiable at 0; finite differences are valid only
/// away from the kink, so inputs are redrawn until the raw head output stays
/// clear of it.
inline bool clear_of_abs_kink(const RefModel& m,
                              const napc::data::Sequence& seq) {
  RefModel linear = m;
  linear.spec.head.abs_activation = false;
  linear.spec.head.cumsum = false;
  const std::vector<double> raw = ref_forward(linear, seq);
  return std::all_of(raw.begin(), raw.end(),
                     [](double v) { return std::abs(v) > 1e-3; });
}

/// Max relative error of BPTT vs finite differences on one random
/// configuration (D<=6, L<=2, U<=6, C=2, T<=8).
inline double run_gradcheck_once(uint64_t seed, bool cumsum = true) {
  napc::Rng shape = napc::Rng::stream("gradcheck.shape", seed);
  const size_t d = static_cast<size_t>(shape.uniform_int(1, 6));
  const size_t l = static_cast<size_t>(shape.uniform_int(1, 2));
  const size_t u = static_cast<size_t>(shape.uniform_int(1, 6));
  const size_t t_frames = static_cast<size_t>(shape.uniform_int(1, 8));

  for (uint64_t attempt = 0;; ++attempt) {
    RefModel m = random_ref_model(d, l, u, 2, seed * 1000 + attempt, cumsum);
    napc::data::Sequence seq =
        make_sequence("g", d, t_frames,
                      {shape.uniform_int(0, 3), shape.uniform_int(0, 3)},
                      seed * 77 + attempt);
    if (!clear_of_abs_kink(m, seq)) continue;

    napc::train::LossConfig cfg;
    cfg.final_weight = 1.0f;
    cfg.corridor_weight = 0.7f;

    napc::nn::WeightsT<double> bptt = napc::nn::make_weights<double>(m.spec);
    napc::train::bptt_sequence<double>(m.spec, m.w, seq, {}, cfg, bptt);
    const napc::nn::WeightsT<double> fd = fd_gradients(m, seq, cfg);
    return max_rel_err(bptt, fd);
  }
}

}  // namespace testsup
