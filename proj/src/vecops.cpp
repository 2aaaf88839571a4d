#include "sqlink/vecops.hpp"

#include <cassert>
#include <cmath>
#include <cstdlib>
#include <cstring>

namespace sqlink::vecops {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

}  // namespace scalar

namespace {

struct Kernels {
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*scale)(double, double*, std::size_t);
  const char* name;
};

bool cpu_has_avx2_fma() {
#if defined(SQLINK_HAVE_AVX2_TU) && defined(__GNUC__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Kernels pick_kernels() {
  const char* force = std::getenv("SQLINK_KERNELS");
  bool want_scalar = force != nullptr && std::strcmp(force, "scalar") == 0;
#ifdef SQLINK_HAVE_AVX2_TU
  if (!want_scalar && cpu_has_avx2_fma()) {
    return Kernels{&avx2::dot, &avx2::axpy, &avx2::scale, "avx2"};
  }
#endif
  (void)want_scalar;
  return Kernels{&scalar::dot, &scalar::axpy, &scalar::scale, "scalar"};
}

const Kernels& active() {
  static const Kernels k = pick_kernels();
  return k;
}

}  // namespace

bool avx2_available() { return cpu_has_avx2_fma(); }

const char* active_kernel_name() { return active().name; }

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return active().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  active().axpy(alpha, x.data(), y.data(), x.size());
}

void scale(double alpha, std::span<double> x) {
  active().scale(alpha, x.data(), x.size());
}

double l2_norm(std::span<const double> x) {
  return std::sqrt(active().dot(x.data(), x.data(), x.size()));
}

void matvec(std::span<const double> a, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> y) {
  assert(a.size() == rows * cols && x.size() == cols && y.size() == rows);
  const Kernels& k = active();
  for (std::size_t r = 0; r < rows; ++r) {
    y[r] = k.dot(a.data() + r * cols, x.data(), cols);
  }
}

void matvec_t(std::span<const double> a, std::size_t rows, std::size_t cols,
              std::span<const double> x, std::span<double> y) {
  assert(a.size() == rows * cols && x.size() == rows && y.size() == cols);
  std::memset(y.data(), 0, cols * sizeof(double));
  const Kernels& k = active();
  for (std::size_t r = 0; r < rows; ++r) {
    k.axpy(x[r], a.data() + r * cols, y.data(), cols);
  }
}

void ger(std::span<double> a, std::size_t rows, std::size_t cols, double alpha,
         std::span<const double> x, std::span<const double> y) {
  assert(a.size() == rows * cols && x.size() == rows && y.size() == cols);
  const Kernels& k = active();
  for (std::size_t r = 0; r < rows; ++r) {
    k.axpy(alpha * x[r], y.data(), a.data() + r * cols, cols);
  }
}

}  // namespace sqlink::vecops
