#pragma once
// Dense arithmetic kernels used by the numeric inner loops (Cholesky,
// triangular solves, MLP forward/backward, neighbor scans).
//
// Two implementations share one contract: a portable scalar reference and
// an AVX2/FMA variant. The active one is picked at startup from CPUID and
// can be overridden with set_impl() or the EPIC_SIMD environment variable
// (EPIC_SIMD=scalar|avx2). Results may differ across implementations only
// by floating-point reassociation; the test suite pins the tolerance.

#include <cstddef>

namespace epic::kernels {

enum class Impl { scalar, avx2 };

bool avx2_available();

Impl active();
void set_impl(Impl impl);

// y . x over n elements
double dot(const double* a, const double* b, std::size_t n);

// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);

double sum(const double* x, std::size_t n);

// squared Euclidean distance
double sq_dist(const double* a, const double* b, std::size_t n);

// y = A x, A row-major rows x cols
void matvec(const double* a, std::size_t rows, std::size_t cols,
            const double* x, double* y);

// y = A^T x, A row-major rows x cols, y has cols elements
void matvec_t(const double* a, std::size_t rows, std::size_t cols,
              const double* x, double* y);

// A += alpha * x y^T, A row-major rows x cols
void ger(double* a, std::size_t rows, std::size_t cols, double alpha,
         const double* x, const double* y);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double sum(const double* x, std::size_t n);
double sq_dist(const double* a, const double* b, std::size_t n);
void matvec(const double* a, std::size_t rows, std::size_t cols,
            const double* x, double* y);
void matvec_t(const double* a, std::size_t rows, std::size_t cols,
              const double* x, double* y);
void ger(double* a, std::size_t rows, std::size_t cols, double alpha,
         const double* x, const double* y);
} // namespace scalar

#ifdef EPIC_HAVE_AVX2
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double sum(const double* x, std::size_t n);
double sq_dist(const double* a, const double* b, std::size_t n);
void matvec(const double* a, std::size_t rows, std::size_t cols,
            const double* x, double* y);
void matvec_t(const double* a, std::size_t rows, std::size_t cols,
              const double* x, double* y);
void ger(double* a, std::size_t rows, std::size_t cols, double alpha,
         const double* x, const double* y);
} // namespace avx2
#endif

} // namespace epic::kernels
