#include "mdre/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace mdre::kern {

namespace ref {

double sum(const double* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
}

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double sq_dist(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double abs_diff_sum(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::fabs(a[i] - b[i]);
    return s;
}

void matvec(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = dot(a + r * cols, x, cols);
}

void matvec_t_acc(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) axpy(x[r], a + r * cols, y, cols);
}

void ger(double alpha, const double* x, std::size_t m, const double* y, std::size_t n, double* a) {
    for (std::size_t r = 0; r < m; ++r) axpy(alpha * x[r], y, a + r * n, n);
}

}  // namespace ref

namespace {

struct Ops {
    double (*sum)(const double*, std::size_t);
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    double (*sq_dist)(const double*, const double*, std::size_t);
    double (*abs_diff_sum)(const double*, const double*, std::size_t);
    void (*matvec)(const double*, std::size_t, std::size_t, const double*, double*);
    void (*matvec_t_acc)(const double*, std::size_t, std::size_t, const double*, double*);
    void (*ger)(double, const double*, std::size_t, const double*, std::size_t, double*);
};

constexpr Ops kScalarOps{ref::sum,          ref::dot,    ref::axpy,
                         ref::sq_dist,      ref::abs_diff_sum,
                         ref::matvec,       ref::matvec_t_acc,
                         ref::ger};

#ifdef MDRE_HAVE_AVX2_KERNELS
constexpr Ops kAvx2Ops{avx2::sum,          avx2::dot,    avx2::axpy,
                       avx2::sq_dist,      avx2::abs_diff_sum,
                       avx2::matvec,       avx2::matvec_t_acc,
                       avx2::ger};
#endif

Backend resolve_backend() {
    if (const char* env = std::getenv("MULTIDRE_SIMD")) {
        if (std::strcmp(env, "scalar") == 0) return Backend::Scalar;
    }
#ifdef MDRE_HAVE_AVX2_KERNELS
    if (avx2::supported()) return Backend::Avx2;
#endif
    return Backend::Scalar;
}

Backend g_backend = resolve_backend();
const Ops* g_ops = (g_backend == Backend::Scalar) ? &kScalarOps
#ifdef MDRE_HAVE_AVX2_KERNELS
                                                  : &kAvx2Ops;
#else
                                                  : &kScalarOps;
#endif

}  // namespace

Backend active() { return g_backend; }

const char* backend_name() { return g_backend == Backend::Avx2 ? "avx2" : "scalar"; }

void force(Backend b) {
    if (b == Backend::Avx2) {
#ifdef MDRE_HAVE_AVX2_KERNELS
        if (!avx2::supported()) throw std::runtime_error("avx2 backend not supported on this CPU");
        g_backend = Backend::Avx2;
        g_ops = &kAvx2Ops;
        return;
#else
        throw std::runtime_error("avx2 backend not built on this architecture");
#endif
    }
    g_backend = Backend::Scalar;
    g_ops = &kScalarOps;
}

double sum(const double* x, std::size_t n) { return g_ops->sum(x, n); }
double dot(const double* a, const double* b, std::size_t n) { return g_ops->dot(a, b, n); }
void axpy(double a, const double* x, double* y, std::size_t n) { g_ops->axpy(a, x, y, n); }
double sq_dist(const double* a, const double* b, std::size_t n) { return g_ops->sq_dist(a, b, n); }
double abs_diff_sum(const double* a, const double* b, std::size_t n) {
    return g_ops->abs_diff_sum(a, b, n);
}
void matvec(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    g_ops->matvec(a, rows, cols, x, y);
}
void matvec_t_acc(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    g_ops->matvec_t_acc(a, rows, cols, x, y);
}
void ger(double alpha, const double* x, std::size_t m, const double* y, std::size_t n, double* a) {
    g_ops->ger(alpha, x, m, y, n, a);
}

}  // namespace mdre::kern
