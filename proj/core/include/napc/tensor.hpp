#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace napc {

// Row-major dense matrix. All dot products in this project run left to right
// in index order; that fixed reduction order is part of the determinism
// contract, so no BLAS backend is used.
template <class T>
struct Mat {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<T> data;

  Mat() = default;
  Mat(size_t r, size_t c) : rows(r), cols(c), data(r * c, T(0)) {}

  T& operator()(size_t r, size_t c) { return data[r * cols + c]; }
  const T& operator()(size_t r, size_t c) const { return data[r * cols + c]; }

  size_t size() const { return data.size(); }

  template <class U>
  Mat<U> cast() const {
    Mat<U> out(rows, cols);
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

using MatF = Mat<float>;

/// out[j] = sum_d in[d] * w(d, j) + b[j], row-vector times matrix.
template <class T>
void affine_rowvec(const T* in, size_t in_dim, const Mat<T>& w,
                   const std::vector<T>& b, T* out) {
  assert(w.rows == in_dim && w.cols == b.size());
  const size_t out_dim = w.cols;
  for (size_t j = 0; j < out_dim; ++j) out[j] = b[j];
  for (size_t d = 0; d < in_dim; ++d) {
    const T x = in[d];
    const T* wrow = &w.data[d * out_dim];
    for (size_t j = 0; j < out_dim; ++j) out[j] += x * wrow[j];
  }
}

/// out[j] += sum_d in[d] * w(d, j); no bias, accumulates.
template <class T>
void matvec_accum_rowvec(const T* in, size_t in_dim, const Mat<T>& w, T* out) {
  const size_t out_dim = w.cols;
  for (size_t d = 0; d < in_dim; ++d) {
    const T x = in[d];
    const T* wrow = &w.data[d * out_dim];
    for (size_t j = 0; j < out_dim; ++j) out[j] += x * wrow[j];
  }
}

template <class T>
bool all_finite(const std::vector<T>& v) {
  for (T x : v)
    if (!std::isfinite(static_cast<double>(x))) return false;
  return true;
}

}  // namespace napc
