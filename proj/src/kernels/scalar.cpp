#include "mvp/kernels.hpp"

namespace mvp::kernels {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
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
    const double gr = g[r];
    for (std::size_t c = 0; c < cols; ++c) x[c] += row[c] * gr;
  }
}

void ger(double* w, const double* g, const double* x, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = w + r * cols;
    const double gr = g[r];
    for (std::size_t c = 0; c < cols; ++c) row[c] += gr * x[c];
  }
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void lerp(double t, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += t * (x[i] - y[i]);
}

void gemm_nt(const double* x, const double* w, const double* bias, double* y, std::size_t rows,
             std::size_t in, std::size_t out) {
  for (std::size_t r = 0; r < rows; ++r) gemv(w, x + r * in, bias, y + r * out, out, in);
}

}  // namespace

const KernelTable& reference_table() {
  static const KernelTable table{"reference", dot, gemv, gemv_t_acc, ger, axpy, lerp, gemm_nt};
  return table;
}

}  // namespace mvp::kernels
