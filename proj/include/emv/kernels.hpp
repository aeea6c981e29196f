#pragma once

// Data-parallel inner loops with a portable scalar version and an AVX2
// version selected at run time. Elementwise kernels give bit-identical
// results on both paths; the reduction uses four interleaved partial sums in
// both versions so it matches too.
//
// Set EMV_SIMD=scalar in the environment to force the scalar path.

#include <cstddef>
#include <string_view>

namespace emv::kernels {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa);

/// Path used by the dispatching entry points (decided once per process).
Isa active_isa();

/// True when the CPU supports the AVX2 path.
bool avx2_available();

/// Polynomial basis in (s, tau): out[k * n + t] = s[t]^i * tau[t]^j with
/// k = i * m + (j - 1), 0 <= i <= m, 1 <= j <= m.
void basis_eval(const double* s, const double* tau, std::size_t n, int m, double* out);

/// out[k] = sum_t c[t] * basis[k * n + t] for k < K.
void basis_weighted_sums(const double* c, const double* basis, std::size_t n, int K, double* out);

/// u = (cx x + cl l + c0) + sd z, per path.
void affine_action(const double* cx, const double* cl, const double* c0, const double* sd,
                   const double* x, const double* l, const double* z, std::size_t n, double* u);

/// x <- e0 x + (e1 - e0) u,  l <- q l, per path.
void surplus_step(double* x, double* l, const double* u, const double* e0, const double* e1,
                  const double* q, std::size_t n);

namespace scalar {
void basis_eval(const double* s, const double* tau, std::size_t n, int m, double* out);
void basis_weighted_sums(const double* c, const double* basis, std::size_t n, int K, double* out);
void affine_action(const double* cx, const double* cl, const double* c0, const double* sd,
                   const double* x, const double* l, const double* z, std::size_t n, double* u);
void surplus_step(double* x, double* l, const double* u, const double* e0, const double* e1,
                  const double* q, std::size_t n);
}  // namespace scalar

namespace avx2 {
void basis_eval(const double* s, const double* tau, std::size_t n, int m, double* out);
void basis_weighted_sums(const double* c, const double* basis, std::size_t n, int K, double* out);
void affine_action(const double* cx, const double* cl, const double* c0, const double* sd,
                   const double* x, const double* l, const double* z, std::size_t n, double* u);
void surplus_step(double* x, double* l, const double* u, const double* e0, const double* e1,
                  const double* q, std::size_t n);
}  // namespace avx2

}  // namespace emv::kernels
