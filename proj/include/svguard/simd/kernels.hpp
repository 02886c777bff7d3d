#pragma once

// Double-precision inner loops shared by the moment estimators and the
// recurrent networks. Each kernel has a scalar reference implementation and
// an AVX2/FMA variant; the variant is picked once at startup from CPUID and
// can be forced to scalar with SVGUARD_SIMD=scalar.
//
// Variants agree to rounding, not bit for bit: the vector kernels sum in
// four interleaved lanes.

#include <cstddef>

namespace svguard::simd {

enum class Backend { Scalar, Avx2 };

struct CentralSums {
  double s2 = 0.0;  // sum (x - mean)^2
  double s3 = 0.0;  // sum (x - mean)^3
};

namespace scalar {
double sum(const double* x, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
CentralSums central_sums(const double* x, std::size_t n, double mean);
}  // namespace scalar

namespace avx2 {
bool supported();
double sum(const double* x, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
CentralSums central_sums(const double* x, std::size_t n, double mean);
}  // namespace avx2

Backend active_backend();
const char* backend_name(Backend b);
/// Forces a backend; falls back to scalar when AVX2 is unavailable.
void set_backend(Backend b);

double sum(const double* x, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
/// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);
CentralSums central_sums(const double* x, std::size_t n, double mean);

}  // namespace svguard::simd
