#include "napc/model.hpp"

#include <cmath>

#include "napc/digest.hpp"
#include "napc/errors.hpp"
#include "napc/rng.hpp"

namespace napc::nn {

void ModelSpec::validate() const {
  if (input_dim < 1 || lstm_layers < 1 || lstm_units < 1 || num_classes < 1)
    throw DataError("model spec dimensions must all be >= 1");
}

namespace {

void fill_uniform(std::vector<float>& v, float limit, Rng& rng) {
  for (float& x : v) x = static_cast<float>(rng.uniform(-limit, limit));
}

float glorot_limit(size_t fan_in, size_t fan_out) {
  return std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
}

}  // namespace

Weights init_weights(const ModelSpec& spec, uint64_t weights_seed) {
  spec.validate();
  Weights w = make_weights<float>(spec);
  Rng rng = Rng::stream("weights", weights_seed);

  fill_uniform(w.fc_in_w.data, glorot_limit(spec.input_dim, spec.lstm_units), rng);
  // fc_in_b stays zero
  for (auto& layer : w.lstm) {
    const float lim = glorot_limit(spec.lstm_units, 4 * spec.lstm_units);
    fill_uniform(layer.w.data, lim, rng);
    fill_uniform(layer.u.data, lim, rng);
    // forget-gate bias +1, block order (i, f, c, o)
    for (size_t j = 0; j < spec.lstm_units; ++j)
      layer.b[spec.lstm_units + j] = 1.0f;
  }
  fill_uniform(w.fc_out_w.data, glorot_limit(spec.lstm_units, spec.num_classes), rng);
  // fc_out_b stays zero
  return w;
}

std::vector<int64_t> round_counts(const std::vector<float>& last_frame) {
  std::vector<int64_t> out;
  out.reserve(last_frame.size());
  for (float v : last_frame) {
    if (!std::isfinite(v)) throw NumericError("non-finite count before rounding");
    out.push_back(static_cast<int64_t>(std::round(v)));  // half away from zero
  }
  return out;
}

uint64_t weights_fingerprint(const Weights& weights) {
  uint64_t h = 0xcbf29ce484222325ull;
  weights.for_each_param([&h](const std::vector<float>& v) {
    h = fnv1a64(v.data(), v.size() * sizeof(float), h);
  });
  return h;
}

}  // namespace napc::nn
