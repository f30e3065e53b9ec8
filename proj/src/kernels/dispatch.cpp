#include <atomic>
#include <stdexcept>
#include <string>

#include "mvp/kernels.hpp"

namespace mvp::kernels {
namespace {

std::atomic<const KernelTable*> g_active{nullptr};
std::atomic<Mode> g_mode{Mode::Reference};

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

}  // namespace

bool simd_available() {
  static const bool available = avx2_table() != nullptr && cpu_has_avx2_fma();
  return available;
}

void set_mode(Mode m) {
  if (m == Mode::Simd) {
    if (!simd_available()) throw std::runtime_error("SIMD kernels are not available on this CPU");
    g_active.store(avx2_table());
  } else {
    g_active.store(&reference_table());
  }
  g_mode.store(m);
}

Mode mode() { return g_mode.load(); }

const KernelTable& active() {
  const KernelTable* t = g_active.load(std::memory_order_relaxed);
  return t ? *t : reference_table();
}

Mode parse_mode(std::string_view text) {
  if (text == "reference" || text == "scalar") return Mode::Reference;
  if (text == "simd" || text == "avx2") return Mode::Simd;
  throw std::invalid_argument("unknown kernel mode '" + std::string(text) + "'");
}

std::string_view mode_name(Mode m) { return m == Mode::Simd ? "simd" : "reference"; }

}  // namespace mvp::kernels
