// Compiled with -mavx2 only. No FMA: products and sums round exactly like
// the scalar loops.
#include "emv/kernels.hpp"

#if defined(__AVX2__)
#include <immintrin.h>

namespace emv::kernels::avx2 {

void basis_eval(const double* s, const double* tau, std::size_t n, int m, double* out) {
  std::size_t t = 0;
  for (; t + 4 <= n; t += 4) {
    const __m256d sv = _mm256_loadu_pd(s + t);
    const __m256d tv = _mm256_loadu_pd(tau + t);
    __m256d sp = _mm256_set1_pd(1.0);
    for (int i = 0; i <= m; ++i) {
      __m256d tp = tv;
      for (int j = 1; j <= m; ++j) {
        _mm256_storeu_pd(out + static_cast<std::size_t>(i * m + j - 1) * n + t,
                         _mm256_mul_pd(sp, tp));
        tp = _mm256_mul_pd(tp, tv);
      }
      sp = _mm256_mul_pd(sp, sv);
    }
  }
  if (t < n) {
    // Tail through the scalar loop on a shifted view.
    const std::size_t rest = n - t;
    for (std::size_t r = 0; r < rest; ++r) {
      double sp = 1.0;
      for (int i = 0; i <= m; ++i) {
        double tp = tau[t + r];
        for (int j = 1; j <= m; ++j) {
          out[static_cast<std::size_t>(i * m + j - 1) * n + t + r] = sp * tp;
          tp = tp * tau[t + r];
        }
        sp = sp * s[t + r];
      }
    }
  }
}

void basis_weighted_sums(const double* c, const double* basis, std::size_t n, int K, double* out) {
  for (int k = 0; k < K; ++k) {
    const double* b = basis + static_cast<std::size_t>(k) * n;
    __m256d acc = _mm256_setzero_pd();
    std::size_t t = 0;
    for (; t + 4 <= n; t += 4) {
      acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(c + t), _mm256_loadu_pd(b + t)));
    }
    alignas(32) double lane[4];
    _mm256_store_pd(lane, acc);
    for (int r = 0; t < n; ++t, ++r) lane[r] = lane[r] + c[t] * b[t];
    out[k] = (lane[0] + lane[2]) + (lane[1] + lane[3]);
  }
}

void affine_action(const double* cx, const double* cl, const double* c0, const double* sd,
                   const double* x, const double* l, const double* z, std::size_t n, double* u) {
  std::size_t p = 0;
  for (; p + 4 <= n; p += 4) {
    const __m256d a = _mm256_mul_pd(_mm256_loadu_pd(cx + p), _mm256_loadu_pd(x + p));
    const __m256d b = _mm256_mul_pd(_mm256_loadu_pd(cl + p), _mm256_loadu_pd(l + p));
    const __m256d mean = _mm256_add_pd(_mm256_add_pd(a, b), _mm256_loadu_pd(c0 + p));
    const __m256d noise = _mm256_mul_pd(_mm256_loadu_pd(sd + p), _mm256_loadu_pd(z + p));
    _mm256_storeu_pd(u + p, _mm256_add_pd(mean, noise));
  }
  for (; p < n; ++p) u[p] = (cx[p] * x[p] + cl[p] * l[p] + c0[p]) + sd[p] * z[p];
}

void surplus_step(double* x, double* l, const double* u, const double* e0, const double* e1,
                  const double* q, std::size_t n) {
  std::size_t p = 0;
  for (; p + 4 <= n; p += 4) {
    const __m256d e0v = _mm256_loadu_pd(e0 + p);
    const __m256d xv = _mm256_loadu_pd(x + p);
    const __m256d ex = _mm256_sub_pd(_mm256_loadu_pd(e1 + p), e0v);
    const __m256d nx =
        _mm256_add_pd(_mm256_mul_pd(e0v, xv), _mm256_mul_pd(ex, _mm256_loadu_pd(u + p)));
    _mm256_storeu_pd(x + p, nx);
    _mm256_storeu_pd(l + p, _mm256_mul_pd(_mm256_loadu_pd(q + p), _mm256_loadu_pd(l + p)));
  }
  for (; p < n; ++p) {
    x[p] = e0[p] * x[p] + (e1[p] - e0[p]) * u[p];
    l[p] = q[p] * l[p];
  }
}

}  // namespace emv::kernels::avx2

#else

// Non-x86 builds: the dispatcher never selects this path, forward anyway.
namespace emv::kernels::avx2 {
void basis_eval(const double* s, const double* tau, std::size_t n, int m, double* out) {
  scalar::basis_eval(s, tau, n, m, out);
}
void basis_weighted_sums(const double* c, const double* basis, std::size_t n, int K, double* out) {
  scalar::basis_weighted_sums(c, basis, n, K, out);
}
void affine_action(const double* cx, const double* cl, const double* c0, const double* sd,
                   const double* x, const double* l, const double* z, std::size_t n, double* u) {
  scalar::affine_action(cx, cl, c0, sd, x, l, z, n, u);
}
void surplus_step(double* x, double* l, const double* u, const double* e0, const double* e1,
                  const double* q, std::size_t n) {
  scalar::surplus_step(x, l, u, e0, e1, q, n);
}
}  // namespace emv::kernels::avx2

#endif
