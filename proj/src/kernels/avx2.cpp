// Compiled with -mavx2 -mfma. Only reached after a runtime CPU check.
#include "mvp/kernels.hpp"

#if defined(MVP_HAVE_AVX2)

#include <immintrin.h>

namespace mvp::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double acc = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void gemv(const double* w, const double* x, const double* bias, double* y, std::size_t rows,
          std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double v = dot(w + r * cols, x, cols);
    y[r] = bias ? v + bias[r] : v;
  }
}

void gemv_t_acc(const double* w, const double* g, double* x, std::size_t rows,
                std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = w + r * cols;
    const __m256d gr = _mm256_set1_pd(g[r]);
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      const __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(row + c), gr);
      _mm256_storeu_pd(x + c, _mm256_add_pd(_mm256_loadu_pd(x + c), prod));
    }
    for (; c < cols; ++c) x[c] += row[c] * g[r];
  }
}

void ger(double* w, const double* g, const double* x, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = w + r * cols;
    const __m256d gr = _mm256_set1_pd(g[r]);
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      const __m256d prod = _mm256_mul_pd(gr, _mm256_loadu_pd(x + c));
      _mm256_storeu_pd(row + c, _mm256_add_pd(_mm256_loadu_pd(row + c), prod));
    }
    for (; c < cols; ++c) row[c] += g[r] * x[c];
  }
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(av, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void lerp(double t, const double* x, double* y, std::size_t n) {
  const __m256d tv = _mm256_set1_pd(t);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d yv = _mm256_loadu_pd(y + i);
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), yv);
    _mm256_storeu_pd(y + i, _mm256_add_pd(yv, _mm256_mul_pd(tv, d)));
  }
  for (; i < n; ++i) y[i] += t * (x[i] - y[i]);
}

// 2 input rows x 4 weight rows per block; each accumulator holds 4 partial sums.
void gemm_nt(const double* x, const double* w, const double* bias, double* y, std::size_t rows,
             std::size_t in, std::size_t out) {
  const std::size_t in4 = in & ~std::size_t{3};
  std::size_t r = 0;
  for (; r + 2 <= rows; r += 2) {
    const double* x0 = x + r * in;
    const double* x1 = x0 + in;
    double* y0 = y + r * out;
    double* y1 = y0 + out;
    std::size_t o = 0;
    for (; o + 4 <= out; o += 4) {
      const double* w0 = w + o * in;
      const double* w1 = w0 + in;
      const double* w2 = w1 + in;
      const double* w3 = w2 + in;
      __m256d a00 = _mm256_setzero_pd(), a01 = _mm256_setzero_pd();
      __m256d a02 = _mm256_setzero_pd(), a03 = _mm256_setzero_pd();
      __m256d a10 = _mm256_setzero_pd(), a11 = _mm256_setzero_pd();
      __m256d a12 = _mm256_setzero_pd(), a13 = _mm256_setzero_pd();
      for (std::size_t k = 0; k < in4; k += 4) {
        const __m256d xv0 = _mm256_loadu_pd(x0 + k);
        const __m256d xv1 = _mm256_loadu_pd(x1 + k);
        __m256d wv = _mm256_loadu_pd(w0 + k);
        a00 = _mm256_fmadd_pd(xv0, wv, a00);
        a10 = _mm256_fmadd_pd(xv1, wv, a10);
        wv = _mm256_loadu_pd(w1 + k);
        a01 = _mm256_fmadd_pd(xv0, wv, a01);
        a11 = _mm256_fmadd_pd(xv1, wv, a11);
        wv = _mm256_loadu_pd(w2 + k);
        a02 = _mm256_fmadd_pd(xv0, wv, a02);
        a12 = _mm256_fmadd_pd(xv1, wv, a12);
        wv = _mm256_loadu_pd(w3 + k);
        a03 = _mm256_fmadd_pd(xv0, wv, a03);
        a13 = _mm256_fmadd_pd(xv1, wv, a13);
      }
      double s[8] = {hsum(a00), hsum(a01), hsum(a02), hsum(a03),
                     hsum(a10), hsum(a11), hsum(a12), hsum(a13)};
      for (std::size_t k = in4; k < in; ++k) {
        s[0] += x0[k] * w0[k];
        s[1] += x0[k] * w1[k];
        s[2] += x0[k] * w2[k];
        s[3] += x0[k] * w3[k];
        s[4] += x1[k] * w0[k];
        s[5] += x1[k] * w1[k];
        s[6] += x1[k] * w2[k];
        s[7] += x1[k] * w3[k];
      }
      for (std::size_t j = 0; j < 4; ++j) {
        y0[o + j] = bias ? s[j] + bias[o + j] : s[j];
        y1[o + j] = bias ? s[4 + j] + bias[o + j] : s[4 + j];
      }
    }
    for (; o < out; ++o) {
      const double v0 = dot(x0, w + o * in, in);
      const double v1 = dot(x1, w + o * in, in);
      y0[o] = bias ? v0 + bias[o] : v0;
      y1[o] = bias ? v1 + bias[o] : v1;
    }
  }
  for (; r < rows; ++r) gemv(w, x + r * in, bias, y + r * out, out, in);
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{"avx2", dot, gemv, gemv_t_acc, ger, axpy, lerp, gemm_nt};
  return &table;
}

}  // namespace mvp::kernels

#else

namespace mvp::kernels {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace mvp::kernels

#endif
