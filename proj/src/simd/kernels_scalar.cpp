#include "svguard/simd/kernels.hpp"

namespace svguard::simd::scalar {

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

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

CentralSums central_sums(const double* x, std::size_t n, double mean) {
  CentralSums out;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - mean;
    const double d2 = d * d;
    out.s2 += d2;
    out.s3 += d2 * d;
  }
  return out;
}

}  // namespace svguard::simd::scalar
