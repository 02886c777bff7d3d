#include <atomic>
#include <cstdlib>
#include <cstring>

#include "svguard/simd/kernels.hpp"

namespace svguard::simd {

namespace {

struct Table {
  Backend backend;
  double (*sum)(const double*, std::size_t);
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  CentralSums (*central_sums)(const double*, std::size_t, double);
};

constexpr Table kScalar{Backend::Scalar, scalar::sum, scalar::dot, scalar::axpy, scalar::central_sums};
constexpr Table kAvx2{Backend::Avx2, avx2::sum, avx2::dot, avx2::axpy, avx2::central_sums};

const Table* detect() {
  const char* env = std::getenv("SVGUARD_SIMD");
  if (env && std::strcmp(env, "scalar") == 0) return &kScalar;
  return avx2::supported() ? &kAvx2 : &kScalar;
}

std::atomic<const Table*>& table() {
  static std::atomic<const Table*> t{detect()};
  return t;
}

inline const Table& current() { return *table().load(std::memory_order_relaxed); }

}  // namespace

Backend active_backend() { return current().backend; }

const char* backend_name(Backend b) { return b == Backend::Avx2 ? "avx2" : "scalar"; }

void set_backend(Backend b) {
  table().store(b == Backend::Avx2 && avx2::supported() ? &kAvx2 : &kScalar);
}

double sum(const double* x, std::size_t n) { return current().sum(x, n); }
double dot(const double* a, const double* b, std::size_t n) { return current().dot(a, b, n); }
void axpy(double alpha, const double* x, double* y, std::size_t n) { current().axpy(alpha, x, y, n); }
CentralSums central_sums(const double* x, std::size_t n, double mean) {
  return current().central_sums(x, n, mean);
}

}  // namespace svguard::simd
