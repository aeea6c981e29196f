#include <cstdlib>
#include <cstring>

#include "emv/kernels.hpp"

namespace emv::kernels {

namespace {

Isa detect() {
  const char* forced = std::getenv("EMV_SIMD");
  if (forced != nullptr && std::strcmp(forced, "scalar") == 0) return Isa::scalar;
  return avx2_available() ? Isa::avx2 : Isa::scalar;
}

}  // namespace

std::string_view to_string(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool avx2_available() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Isa active_isa() {
  static const Isa isa = detect();
  return isa;
}

void basis_eval(const double* s, const double* tau, std::size_t n, int m, double* out) {
  if (active_isa() == Isa::avx2) return avx2::basis_eval(s, tau, n, m, out);
  scalar::basis_eval(s, tau, n, m, out);
}

void basis_weighted_sums(const double* c, const double* basis, std::size_t n, int K, double* out) {
  if (active_isa() == Isa::avx2) return avx2::basis_weighted_sums(c, basis, n, K, out);
  scalar::basis_weighted_sums(c, basis, n, K, out);
}

void affine_action(const double* cx, const double* cl, const double* c0, const double* sd,
                   const double* x, const double* l, const double* z, std::size_t n, double* u) {
  if (active_isa() == Isa::avx2) return avx2::affine_action(cx, cl, c0, sd, x, l, z, n, u);
  scalar::affine_action(cx, cl, c0, sd, x, l, z, n, u);
}

void surplus_step(double* x, double* l, const double* u, const double* e0, const double* e1,
                  const double* q, std::size_t n) {
  if (active_isa() == Isa::avx2) return avx2::surplus_step(x, l, u, e0, e1, q, n);
  scalar::surplus_step(x, l, u, e0, e1, q, n);
}

}  // namespace emv::kernels
