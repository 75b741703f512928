#include <doctest.h>

#include <cmath>

#include "napc/errors.hpp"
#include "napc/forward.hpp"
#include "napc/model.hpp"
#include "support/test_support.hpp"

using namespace napc;
using testsup::make_sequence;

namespace {

nn::ModelSpec small_spec(size_t d, size_t l, size_t u, size_t c,
                         bool abs_act = true, bool cumsum = true) {
  nn::ModelSpec spec;
  spec.input_dim = d;
  spec.lstm_layers = l;
  spec.lstm_units = u;
  spec.num_classes = c;
  spec.head.abs_activation = abs_act;
  spec.head.cumsum = cumsum;
  return spec;
}

/// Zero model except an fc_out bias; emits |bias| per frame through the head.
nn::Weights emitter_weights(const nn::ModelSpec& spec, float bias0) {
  nn::Weights w = nn::make_weights<float>(spec);
  w.fc_out_b[0] = bias0;
  return w;
}

}  // namespace

TEST_CASE("init_weights is deterministic in the seed and shapes match") {
  const nn::ModelSpec spec = small_spec(4, 1, 2, 2);
  const nn::Weights a = nn::init_weights(spec, 3);
  const nn::Weights b = nn::init_weights(spec, 3);
  CHECK(nn::weights_fingerprint(a) == nn::weights_fingerprint(b));
  const nn::Weights c = nn::init_weights(spec, 4);
  CHECK(nn::weights_fingerprint(a) != nn::weights_fingerprint(c));

  CHECK(a.fc_in_w.rows == 4);
  CHECK(a.fc_in_w.cols == 2);
  CHECK(a.lstm.size() == 1);
  CHECK(a.lstm[0].w.rows == 2);
  CHECK(a.lstm[0].w.cols == 8);
  CHECK(a.lstm[0].u.rows == 2);
  CHECK(a.lstm[0].u.cols == 8);
  CHECK(a.lstm[0].b.size() == 8);
  CHECK(a.fc_out_w.rows == 2);
  CHECK(a.fc_out_w.cols == 2);

  // biases zero except forget gate +1 (block order i, f, c, o)
  CHECK(a.lstm[0].b[0] == 0.0f);
  CHECK(a.lstm[0].b[2] == 1.0f);
  CHECK(a.lstm[0].b[3] == 1.0f);
  CHECK(a.lstm[0].b[4] == 0.0f);
  CHECK(a.fc_in_b == std::vector<float>(2, 0.0f));
}

TEST_CASE("lstm_step matches a scalar reference on saturating gates") {
  // one unit, zero kernels, saturating biases
  nn::LstmLayerT<float> layer;
  layer.w = MatF(1, 4);
  layer.u = MatF(1, 4);
  layer.b = {20.0f, 20.0f, 20.0f, 20.0f};

  std::vector<float> h{0.0f}, c{0.0f}, gates(4, 0.0f);
  const float in = 0.0f;
  for (int t = 0; t < 3; ++t) nn::lstm_step(layer, &in, 1, h, c, gates);

  // scalar oracle in double
  const double sig20 = 1.0 / (1.0 + std::exp(-20.0));
  const double tanh20 = std::tanh(20.0);
  double c_ref = 0.0;
  double h_ref = 0.0;
  for (int t = 0; t < 3; ++t) {
    c_ref = sig20 * tanh20 + sig20 * c_ref;
    h_ref = std::tanh(c_ref) * sig20;
  }
  CHECK(c[0] == doctest::Approx(c_ref).epsilon(1e-5));
  CHECK(h[0] == doctest::Approx(h_ref).epsilon(1e-5));
  CHECK(c[0] == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(h[0] == doctest::Approx(0.99505).epsilon(1e-4));
}

TEST_CASE("negative forget bias blocks accumulation") {
  nn::LstmLayerT<float> layer;
  layer.w = MatF(1, 4);
  layer.u = MatF(1, 4);
  layer.b = {20.0f, -20.0f, 20.0f, 20.0f};

  std::vector<float> h{0.0f}, c{0.0f}, gates(4, 0.0f);
  const float in = 0.0f;
  for (int t = 0; t < 5; ++t) {
    nn::lstm_step(layer, &in, 1, h, c, gates);
    CHECK(c[0] == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("all-zero weights and state produce zero outputs") {
  nn::LstmLayerT<float> layer;
  layer.w = MatF(2, 8);
  layer.u = MatF(2, 8);
  layer.b.assign(8, 0.0f);
  std::vector<float> h(2, 0.0f), c(2, 0.0f), gates(8, 0.0f);
  const std::vector<float> in(2, 0.0f);
  nn::lstm_step(layer, in.data(), 2, h, c, gates);
  CHECK(h == std::vector<float>(2, 0.0f));
  CHECK(c == std::vector<float>(2, 0.0f));
}

TEST_CASE("forward with zero weights predicts zero everywhere") {
  const nn::ModelSpec spec = small_spec(5, 2, 3, 2);
  const nn::Weights w = nn::make_weights<float>(spec);
  const auto seq = make_sequence("z", 5, 7, {0, 0}, 1);
  const nn::Prediction pred = nn::forward_sequence(spec, w, seq);
  for (float v : pred.per_frame) CHECK(v == 0.0f);
  CHECK(pred.final_counts == std::vector<int64_t>{0, 0});
}

TEST_CASE("unit emitter accumulates 0.1 per frame") {
  const nn::ModelSpec spec = small_spec(5, 1, 2, 2);
  const nn::Weights w = emitter_weights(spec, 0.1f);
  const auto seq = make_sequence("e", 5, 10, {1, 0}, 2);
  const nn::Prediction pred = nn::forward_sequence(spec, w, seq);
  CHECK(pred.final_counts == std::vector<int64_t>{1, 0});
  // per-frame trajectory is 0.1, 0.2, ...
  CHECK(pred.frame(0)[0] == doctest::Approx(0.1).epsilon(1e-6));
  CHECK(pred.frame(9)[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("emitter on a 200x loop counts exactly 200") {
  const nn::ModelSpec spec = small_spec(5, 1, 2, 2);
  const nn::Weights w = emitter_weights(spec, 0.1f);
  const auto base = make_sequence("e", 5, 10, {1, 0}, 2);
  const auto looped = data::loop_sequence(base, 200);
  const nn::Prediction pred = nn::forward_sequence(spec, w, looped);
  CHECK(pred.final_counts == std::vector<int64_t>{200, 0});
}

TEST_CASE("round_counts rounds half away from zero") {
  CHECK(nn::round_counts({1.5f}) == std::vector<int64_t>{2});
  CHECK(nn::round_counts({0.49f}) == std::vector<int64_t>{0});
  CHECK(nn::round_counts({-0.5f}) == std::vector<int64_t>{-1});
  CHECK(nn::round_counts({2.02f}) == std::vector<int64_t>{2});
  CHECK(nn::round_counts({-1.5f, 2.5f}) == std::vector<int64_t>{-2, 3});
  CHECK_THROWS_AS(nn::round_counts({NAN}), NumericError);
}

TEST_CASE("cumsum + abs head yields per-class monotone trajectories") {
  const nn::ModelSpec spec = small_spec(6, 2, 4, 2);
  const nn::Weights w = nn::init_weights(spec, 5);
  const auto seq = make_sequence("m", 6, 20, {0, 0}, 3);
  const nn::Prediction pred = nn::forward_sequence(spec, w, seq);
  for (size_t t = 1; t < pred.frame_count(); ++t)
    for (size_t c = 0; c < 2; ++c)
      CHECK(pred.frame(t)[c] >= pred.frame(t - 1)[c]);
  for (int64_t v : pred.final_counts) CHECK(v >= 0);
}

TEST_CASE("forward is bit-deterministic and causal under concatenation") {
  const nn::ModelSpec spec = small_spec(4, 2, 5, 2);
  const nn::Weights w = nn::init_weights(spec, 8);
  const auto s1 = make_sequence("s1", 4, 9, {0, 0}, 10);
  const auto s2 = make_sequence("s2", 4, 6, {0, 0}, 11);

  const nn::Prediction p1 = nn::forward_sequence(spec, w, s1);
  const nn::Prediction p1_again = nn::forward_sequence(spec, w, s1);
  CHECK(p1.per_frame == p1_again.per_frame);

  data::Sequence cat = s1;
  cat.id = "cat";
  cat.frames.insert(cat.frames.end(), s2.frames.begin(), s2.frames.end());
  const nn::Prediction pc = nn::forward_sequence(spec, w, cat);
  for (size_t t = 0; t < s1.frame_count(); ++t)
    for (size_t c = 0; c < 2; ++c)
      CHECK(pc.frame(t)[c] == p1.frame(t)[c]);  // prefix identical bitwise
}

TEST_CASE("forward rejects dimension mismatch") {
  const nn::ModelSpec spec = small_spec(4, 1, 2, 2);
  const nn::Weights w = nn::make_weights<float>(spec);
  const auto seq = make_sequence("bad", 3, 5, {0, 0});
  CHECK_THROWS_AS(nn::forward_sequence(spec, w, seq), DataError);
}
