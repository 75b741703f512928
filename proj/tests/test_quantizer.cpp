#include <doctest.h>

#include <cmath>

#include "napc/errors.hpp"
#include "napc/forward.hpp"
#include "napc/fxp.hpp"
#include "napc/quantizer.hpp"
#include "support/test_support.hpp"

using namespace napc;
using testsup::make_sequence;

namespace {

nn::ModelSpec spec_dlc(size_t d, size_t l, size_t u, size_t c) {
  nn::ModelSpec spec;
  spec.input_dim = d;
  spec.lstm_layers = l;
  spec.lstm_units = u;
  spec.num_classes = c;
  return spec;
}

/// Integer-representable template: zero LSTM core, integer FC weights.
/// Every hidden activation is exactly 0, so any power-of-two scale pair
/// reproduces the float outputs exactly.
nn::Weights integer_template(const nn::ModelSpec& spec) {
  nn::Weights w = nn::make_weights<float>(spec);
  Rng rng = Rng::stream("int.template", 1);
  for (float& v : w.fc_in_w.data)
    v = static_cast<float>(rng.uniform_int(-3, 3));
  for (float& v : w.fc_in_b) v = static_cast<float>(rng.uniform_int(-2, 2));
  for (float& v : w.fc_out_w.data)
    v = static_cast<float>(rng.uniform_int(-2, 2));
  w.fc_out_b[0] = 2.0f;
  return w;
}

std::vector<data::Sequence> integer_frames(size_t dim, size_t count) {
  std::vector<data::Sequence> seqs;
  Rng rng = Rng::stream("int.frames", 3);
  for (size_t i = 0; i < count; ++i) {
    data::Sequence s;
    s.id = "calib" + std::to_string(i);
    s.input_dim = dim;
    s.frames.resize(dim * 12);
    for (float& v : s.frames) v = static_cast<float>(rng.uniform_int(-2, 2));
    s.labels = {0, 0};
    seqs.push_back(std::move(s));
  }
  return seqs;
}

}  // namespace

TEST_CASE("scale_fc applies the scale equations") {
  MatF w(1, 1);
  w(0, 0) = 0.5f;
  std::vector<float> b = {0.25f};
  // w_n = 256 (exp 8), i_n = 4 (exp 2)
  const auto scaled = quant::scale_fc(w, b, {8, 2}, 32);
  REQUIRE(scaled.has_value());
  CHECK(scaled->w(0, 0) == 128);   // 0.5 * 256
  CHECK(scaled->b[0] == 256);      // 0.25 * 256 * 4

  quant::QuantizedModel qm;
  qm.spec = spec_dlc(1, 1, 1, 1);
  qm.scales = {{8, 2}, {0, 0}, {0, 0}};
  CHECK(qm.out_scale_exp(0) == 10);  // o_n = w_n * i_n = 1024
}

TEST_CASE("scale_lstm applies the scale equations and o_n = i_n") {
  MatF w(1, 4), u(1, 4);
  u(0, 0) = -0.125f;
  std::vector<float> b(4, 0.0f);
  const auto scaled = quant::scale_lstm(w, u, b, {6, 3}, 32);
  REQUIRE(scaled.has_value());
  CHECK(scaled->u(0, 0) == -8);  // -0.125 * 64

  quant::QuantizedModel qm;
  qm.spec = spec_dlc(1, 1, 1, 1);
  qm.scales = {{0, 0}, {6, 3}, {0, 0}};
  CHECK(qm.out_scale_exp(1) == 3);  // o_n = i_n regardless of w_n

  qm.scales[1] = {11, 3};
  CHECK(qm.out_scale_exp(1) == 3);
}

TEST_CASE("identity scales keep integer-valued weights exact") {
  MatF w(2, 2);
  w(0, 0) = 3.0f;
  w(0, 1) = -2.0f;
  w(1, 0) = 0.0f;
  w(1, 1) = 7.0f;
  std::vector<float> b = {1.0f, -4.0f};
  const auto scaled = quant::scale_fc(w, b, {0, 0}, 32);
  REQUIRE(scaled.has_value());
  CHECK(scaled->w.data == std::vector<int32_t>{3, -2, 0, 7});
  CHECK(scaled->b == std::vector<int32_t>{1, -4});
}

TEST_CASE("bit-width overflow rejects the draw") {
  MatF w(1, 1);
  w(0, 0) = 3.0f;
  std::vector<float> b = {0.0f};
  // 3 * 2^14 = 49152 exceeds int16 -> rejected
  CHECK_FALSE(quant::scale_fc(w, b, {14, 0}, 16).has_value());
  CHECK(quant::scale_fc(w, b, {13, 0}, 16).has_value());   // 24576 fits
  CHECK(quant::scale_fc(w, b, {14, 0}, 32).has_value());
}

TEST_CASE("quantize_model on an integer-representable template is exact") {
  const nn::ModelSpec spec = spec_dlc(4, 1, 3, 2);
  const nn::Weights w = integer_template(spec);
  const auto calib_seqs = integer_frames(4, 3);
  const auto calib = quant::CalibrationSet::build(spec, w, calib_seqs);

  quant::QuantizerConfig cfg = quant::QuantizerConfig::defaults_for(32);
  cfg.seed = 5;
  const quant::QuantizedModel qm = quant::quantize_model(w, spec, calib, cfg);

  // quantized output equals the float output exactly on the calibration set
  const auto report = quant::verify_margin(qm, calib, 0.0);
  CHECK(report.max_abs_dev == 0.0);
  CHECK(report.pass);

  SUBCASE("same seed reproduces the same scales") {
    const quant::QuantizedModel qm2 = quant::quantize_model(w, spec, calib, cfg);
    CHECK(qm2.scales == qm.scales);
    CHECK(qm2.fc_in_w.data == qm.fc_in_w.data);
  }

  SUBCASE("forced identity scales also succeed") {
    quant::QuantizerConfig ident = cfg;
    ident.exp_min = ident.exp_max = 0;
    const quant::QuantizedModel qid = quant::quantize_model(w, spec, calib, ident);
    for (const auto& s : qid.scales) {
      CHECK(s.w_exp == 0);
      CHECK(s.i_exp == 0);
    }
    CHECK(quant::verify_margin(qid, calib, 0.0).pass);
  }
}

TEST_CASE("quantizing a trained-like random model meets the margin") {
  const nn::ModelSpec spec = spec_dlc(6, 2, 5, 2);
  const nn::Weights w = nn::init_weights(spec, 21);
  std::vector<data::Sequence> seqs;
  for (int i = 0; i < 4; ++i)
    seqs.push_back(make_sequence("c" + std::to_string(i), 6, 15, {0, 0}, 30 + i));
  const auto calib = quant::CalibrationSet::build(spec, w, seqs);

  quant::QuantizerConfig cfg = quant::QuantizerConfig::defaults_for(32);
  cfg.epsilon = 0.45;
  cfg.seed = 9;
  const quant::QuantizedModel qm = quant::quantize_model(w, spec, calib, cfg);

  // rejection soundness: immediate re-verification never fails
  const auto report = quant::verify_margin(qm, calib, cfg.epsilon);
  CHECK(report.pass);
  CHECK(report.max_abs_dev <= 0.45);
  CHECK(report.per_sequence.size() == 4);

  SUBCASE("weight decode bound holds layer by layer") {
    const double wq = std::ldexp(1.0, qm.scales[0].w_exp);
    for (size_t i = 0; i < w.fc_in_w.data.size(); ++i) {
      const double decoded = qm.fc_in_w.data[i] / wq;
      CHECK(std::abs(decoded - w.fc_in_w.data[i]) <= 0.5 / wq + 1e-12);
    }
    const double wl = std::ldexp(1.0, qm.scales[1].w_exp);
    for (size_t i = 0; i < w.lstm[0].u.data.size(); ++i) {
      const double decoded = qm.lstm[0].u.data[i] / wl;
      CHECK(std::abs(decoded - w.lstm[0].u.data[i]) <= 0.5 / wl + 1e-12);
    }
  }

  SUBCASE("epsilon = 0 fails verification when rounding error exists") {
    const auto strict = quant::verify_margin(qm, calib, 0.0);
    CHECK_FALSE(strict.pass);  // this template is not integer-representable
  }
}

TEST_CASE("scale search exhaustion names the failing layer") {
  const nn::ModelSpec spec = spec_dlc(3, 1, 2, 2);
  nn::Weights w = nn::init_weights(spec, 2);  // fractional weights
  std::vector<data::Sequence> seqs = {make_sequence("c", 3, 10, {0, 0}, 1)};
  const auto calib = quant::CalibrationSet::build(spec, w, seqs);

  quant::QuantizerConfig cfg = quant::QuantizerConfig::defaults_for(32);
  cfg.epsilon = 1e-12;  // unreachable for non-representable weights
  cfg.exp_min = cfg.exp_max = 0;
  cfg.max_iters = 4;
  try {
    quant::quantize_model(w, spec, calib, cfg);
    FAIL("expected QuantizeExhausted");
  } catch (const QuantizeExhausted& e) {
    CHECK(e.layer_index == 0);
    CHECK(std::string(e.what()).find("fc_in") != std::string::npos);
  }
}

TEST_CASE("calibration references are float forward outputs") {
  const nn::ModelSpec spec = spec_dlc(4, 1, 2, 2);
  const nn::Weights w = nn::init_weights(spec, 3);
  std::vector<data::Sequence> seqs = {make_sequence("c", 4, 8, {0, 0}, 2)};
  const auto calib = quant::CalibrationSet::build(spec, w, seqs);
  REQUIRE(calib.references.size() == 1);
  const nn::Prediction direct = nn::forward_sequence(spec, w, seqs[0]);
  CHECK(calib.references[0].per_frame == direct.per_frame);
}
