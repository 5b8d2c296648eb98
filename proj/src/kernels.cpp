#include "epic/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace epic::kernels {

bool avx2_available() {
#if defined(EPIC_HAVE_AVX2) && defined(__GNUC__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {

struct Table {
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    double (*sum)(const double*, std::size_t);
    double (*sq_dist)(const double*, const double*, std::size_t);
    void (*matvec)(const double*, std::size_t, std::size_t, const double*, double*);
    void (*matvec_t)(const double*, std::size_t, std::size_t, const double*, double*);
    void (*ger)(double*, std::size_t, std::size_t, double, const double*, const double*);
};

constexpr Table kScalar{scalar::dot,    scalar::axpy,     scalar::sum, scalar::sq_dist,
                        scalar::matvec, scalar::matvec_t, scalar::ger};

#ifdef EPIC_HAVE_AVX2
constexpr Table kAvx2{avx2::dot,    avx2::axpy,     avx2::sum, avx2::sq_dist,
                      avx2::matvec, avx2::matvec_t, avx2::ger};
#endif

Impl pick_default() {
    if (const char* env = std::getenv("EPIC_SIMD")) {
        if (std::strcmp(env, "scalar") == 0) return Impl::scalar;
        if (std::strcmp(env, "avx2") == 0 && avx2_available()) return Impl::avx2;
    }
    return avx2_available() ? Impl::avx2 : Impl::scalar;
}

Impl g_impl = pick_default();

const Table& table() {
#ifdef EPIC_HAVE_AVX2
    if (g_impl == Impl::avx2) return kAvx2;
#endif
    return kScalar;
}

} // namespace

Impl active() { return g_impl; }

void set_impl(Impl impl) {
    g_impl = (impl == Impl::avx2 && avx2_available()) ? Impl::avx2 : Impl::scalar;
}

double dot(const double* a, const double* b, std::size_t n) { return table().dot(a, b, n); }

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    table().axpy(alpha, x, y, n);
}

double sum(const double* x, std::size_t n) { return table().sum(x, n); }

double sq_dist(const double* a, const double* b, std::size_t n) {
    return table().sq_dist(a, b, n);
}

void matvec(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    table().matvec(a, rows, cols, x, y);
}

void matvec_t(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    table().matvec_t(a, rows, cols, x, y);
}

void ger(double* a, std::size_t rows, std::size_t cols, double alpha, const double* x,
         const double* y) {
    table().ger(a, rows, cols, alpha, x, y);
}

} // namespace epic::kernels
