#pragma once

#include <cstddef>

// Data-parallel inner loops used by model evaluation, backpropagation and
// batch losses. Every kernel has a scalar reference implementation and, on
// x86-64 with AVX2+FMA, a vectorized variant selected once at runtime. The
// two are equivalence-tested against each other (they may differ by sum
// reassociation at a few ulp, never more). On other architectures the scalar
// path is used.
//
// Matrices are dense row-major.

namespace mdre::kern {

enum class Backend { Scalar, Avx2 };

// Backend in effect (resolved on first use; MULTIDRE_SIMD=scalar forces the
// reference path).
Backend active();
const char* backend_name();
void force(Backend b);  // test hook; forcing Avx2 on unsupported CPUs throws

double sum(const double* x, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);  // y += a*x
double sq_dist(const double* a, const double* b, std::size_t n);
double abs_diff_sum(const double* a, const double* b, std::size_t n);

// y = A x, A is rows x cols
void matvec(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
// y += A^T x, x has rows entries, y has cols entries
void matvec_t_acc(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
// A += alpha * x y^T, x has m entries, y has n entries
void ger(double alpha, const double* x, std::size_t m, const double* y, std::size_t n, double* a);

// Reference implementations, exposed for equivalence tests.
namespace ref {
double sum(const double* x, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
double sq_dist(const double* a, const double* b, std::size_t n);
double abs_diff_sum(const double* a, const double* b, std::size_t n);
void matvec(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
void matvec_t_acc(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
void ger(double alpha, const double* x, std::size_t m, const double* y, std::size_t n, double* a);
}  // namespace ref

#if defined(__x86_64__) || defined(_M_X64)
#define MDRE_HAVE_AVX2_KERNELS 1
namespace avx2 {
bool supported();  // CPUID check
double sum(const double* x, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
double sq_dist(const double* a, const double* b, std::size_t n);
double abs_diff_sum(const double* a, const double* b, std::size_t n);
void matvec(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
void matvec_t_acc(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
void ger(double alpha, const double* x, std::size_t m, const double* y, std::size_t n, double* a);
}  // namespace avx2
#endif

}  // namespace mdre::kern
