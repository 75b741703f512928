#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "napc/dataio.hpp"
#include "napc/model.hpp"
#include "napc/rng.hpp"
#include "napc/trainer.hpp"

namespace testsup {

class TempDir {
public:
  TempDir() {
    std::string tmpl =
        (std::filesystem::temp_directory_path() / "napc-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const {
    return path_ / name;
  }

private:
  std::filesystem::path path_;
};

inline napc::data::Sequence make_sequence(const std::string& id, size_t dim,
                                          size_t frames,
                                          std::vector<int64_t> labels,
                                          uint64_t seed = 0) {
  napc::data::Sequence seq;
  seq.id = id;
  seq.input_dim = dim;
  seq.labels = std::move(labels);
  seq.frames.resize(frames * dim);
  napc::Rng rng = napc::Rng::stream("test.seq", seed);
  for (float& v : seq.frames) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return seq;
}

// ---------------------------------------------------------------------------
// Independent double-precision reference for the counting network and the
// corridor loss. Written against the equations directly (per-output dot
// products, scalar activations), not the library's loops, so it can serve as
// the finite-difference oracle for the BPTT implementation.

struct RefModel {
  napc::nn::ModelSpec spec;
  napc::nn::WeightsT<double> w;
};

inline double ref_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Per-frame outputs (T x C) of the reference forward pass.
inline std::vector<double> ref_forward(const RefModel& m,
                                       const napc::data::Sequence& seq) {
  const size_t D = m.spec.input_dim, U = m.spec.lstm_units,
               C = m.spec.num_classes, L = m.spec.lstm_layers;
  const size_t T = seq.frame_count();
  std::vector<std::vector<double>> h(L, std::vector<double>(U, 0.0));
  std::vector<std::vector<double>> c(L, std::vector<double>(U, 0.0));
  std::vector<double> out(T * C, 0.0);
  std::vector<double> cum(C, 0.0);
  std::vector<double> cur(U), next(U), pre(4 * U);

  for (size_t t = 0; t < T; ++t) {
    const auto x = seq.frame(t);
    for (size_t j = 0; j < U; ++j) {
      double s = m.w.fc_in_b[j];
      for (size_t d = 0; d < D; ++d)
        s += static_cast<double>(x[d]) * m.w.fc_in_w(d, j);
      cur[j] = s;
    }
    for (size_t l = 0; l < L; ++l) {
      for (size_t g = 0; g < 4 * U; ++g) {
        double s = m.w.lstm[l].b[g];
        for (size_t d = 0; d < U; ++d) s += cur[d] * m.w.lstm[l].w(d, g);
        for (size_t d = 0; d < U; ++d) s += h[l][d] * m.w.lstm[l].u(d, g);
        pre[g] = s;
      }
      for (size_t j = 0; j < U; ++j) {
        const double gi = ref_sigmoid(pre[j]);
        const double gf = ref_sigmoid(pre[U + j]);
        const double gc = std::tanh(pre[2 * U + j]);
        const double go = ref_sigmoid(pre[3 * U + j]);
        c[l][j] = gi * gc + gf * c[l][j];
        next[j] = std::tanh(c[l][j]) * go;
      }
      h[l] = next;
      cur = next;
    }
    for (size_t k = 0; k < C; ++k) {
      double s = m.w.fc_out_b[k];
      for (size_t j = 0; j < U; ++j) s += cur[j] * m.w.fc_out_w(j, k);
      if (m.spec.head.abs_activation) s = std::abs(s);
      if (m.spec.head.cumsum)
        cum[k] += s;
      else
        cum[k] = s;
      out[t * C + k] = cum[k];
    }
  }
  return out;
}

inline double ref_loss(const RefModel& m, const napc::data::Sequence& seq,
                       const napc::train::LossConfig& cfg) {
  const size_t C = m.spec.num_classes;
  const std::vector<double> p = ref_forward(m, seq);
  const size_t T = p.size() / C;
  double corridor = 0.0;
  for (size_t t = 0; t < T; ++t)
    for (size_t k = 0; k < C; ++k) {
      const double v = p[t * C + k];
      const double y = static_cast<double>(seq.labels[k]);
      const double under = v < 0 ? -v : 0;
      const double over = v > y ? v - y : 0;
      corridor += under * under + over * over;
    }
  corridor /= static_cast<double>(T);
  double fin = 0.0;
  for (size_t k = 0; k < C; ++k) {
    const double diff = p[(T - 1) * C + k] - static_cast<double>(seq.labels[k]);
    fin += diff * diff;
  }
  return cfg.final_weight * fin + cfg.corridor_weight * corridor;
}

}  // namespace testsup
