#pragma once

#include <cstddef>
#include <span>

// Dense double-precision kernels behind the embedding and cross-encoder
// arithmetic. A scalar reference implementation always exists; an AVX2+FMA
// variant is compiled on x86-64 and selected at runtime. Both variants are
// exposed directly so tests can assert their equivalence.
namespace sqlink::vecops {

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* x, std::size_t n);
}  // namespace scalar

#ifdef SQLINK_HAVE_AVX2_TU
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* x, std::size_t n);
}  // namespace avx2
#endif

// True when the AVX2 variant is compiled in and the CPU supports AVX2+FMA.
bool avx2_available();

// "avx2" or "scalar". Honors SQLINK_KERNELS=scalar|avx2 (checked once).
const char* active_kernel_name();

double dot(std::span<const double> a, std::span<const double> b);

// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// x *= alpha
void scale(double alpha, std::span<double> x);

double l2_norm(std::span<const double> x);

// y = A x for row-major A (rows x cols); y has length rows.
void matvec(std::span<const double> a, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> y);

// y = A^T x for row-major A (rows x cols); y has length cols.
void matvec_t(std::span<const double> a, std::size_t rows, std::size_t cols,
              std::span<const double> x, std::span<double> y);

// A += alpha * x y^T (rank-1 update of row-major A, rows x cols).
void ger(std::span<double> a, std::size_t rows, std::size_t cols, double alpha,
         std::span<const double> x, std::span<const double> y);

}  // namespace sqlink::vecops
