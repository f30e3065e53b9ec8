#pragma once

// Dense linear-algebra kernels used by the network substrate.
//
// Two implementations exist: a scalar reference (strict left-to-right
// accumulation, no contraction) and an AVX2/FMA variant. The active table
// is chosen at runtime. Elementwise kernels (axpy, lerp, ger, gemv_t_acc)
// are bit-identical across variants; reductions (dot, gemv, gemm_nt) agree
// to rounding only, so reproducible traces require the reference mode.

#include <cstddef>
#include <string_view>

namespace mvp::kernels {

struct KernelTable {
  const char* name;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y = W x (+ bias); W is rows x cols, row-major; bias may be null.
  void (*gemv)(const double* w, const double* x, const double* bias, double* y,
               std::size_t rows, std::size_t cols);
  // x[c] += sum_r W[r][c] * g[r]
  void (*gemv_t_acc)(const double* w, const double* g, double* x, std::size_t rows,
                     std::size_t cols);
  // W[r][c] += g[r] * x[c]
  void (*ger)(double* w, const double* g, const double* x, std::size_t rows, std::size_t cols);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // y += t * (x - y)
  void (*lerp)(double t, const double* x, double* y, std::size_t n);
  // Y[r][o] = X[r] . W[o] (+ bias[o]); X is rows x in, W is out x in.
  void (*gemm_nt)(const double* x, const double* w, const double* bias, double* y,
                  std::size_t rows, std::size_t in, std::size_t out);
};

enum class Mode { Reference, Simd };

const KernelTable& reference_table();
// Null when the binary was built without AVX2 support.
const KernelTable* avx2_table();

bool simd_available();

// Throws std::runtime_error when Simd is requested but unsupported.
void set_mode(Mode mode);
Mode mode();

const KernelTable& active();

Mode parse_mode(std::string_view text);
std::string_view mode_name(Mode mode);

}  // namespace mvp::kernels
