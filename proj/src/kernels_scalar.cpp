#include "emv/kernels.hpp"

namespace emv::kernels::scalar {

void basis_eval(const double* s, const double* tau, std::size_t n, int m, double* out) {
  for (std::size_t t = 0; t < n; ++t) {
    double sp = 1.0;
    for (int i = 0; i <= m; ++i) {
      double tp = tau[t];
      for (int j = 1; j <= m; ++j) {
        out[static_cast<std::size_t>(i * m + j - 1) * n + t] = sp * tp;
        tp = tp * tau[t];
      }
      sp = sp * s[t];
    }
  }
}

void basis_weighted_sums(const double* c, const double* basis, std::size_t n, int K, double* out) {
  for (int k = 0; k < K; ++k) {
    const double* b = basis + static_cast<std::size_t>(k) * n;
    // Lane r accumulates t = r mod 4, like the vector version.
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t t = 0;
    for (; t + 4 <= n; t += 4) {
      for (int r = 0; r < 4; ++r) acc[r] = acc[r] + c[t + r] * b[t + r];
    }
    for (int r = 0; t < n; ++t, ++r) acc[r] = acc[r] + c[t] * b[t];
    out[k] = (acc[0] + acc[2]) + (acc[1] + acc[3]);
  }
}

void affine_action(const double* cx, const double* cl, const double* c0, const double* sd,
                   const double* x, const double* l, const double* z, std::size_t n, double* u) {
  for (std::size_t p = 0; p < n; ++p) u[p] = (cx[p] * x[p] + cl[p] * l[p] + c0[p]) + sd[p] * z[p];
}

void surplus_step(double* x, double* l, const double* u, const double* e0, const double* e1,
                  const double* q, std::size_t n) {
  for (std::size_t p = 0; p < n; ++p) {
    x[p] = e0[p] * x[p] + (e1[p] - e0[p]) * u[p];
    l[p] = q[p] * l[p];
  }
}

}  // namespace emv::kernels::scalar
