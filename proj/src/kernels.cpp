#include "kernels.hpp"

#include <cmath>

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

namespace penning::detail {

#if defined(__AVX512F__)

std::size_t p2p(const double* tx, const double* ty, const double* tz, std::size_t nt,
                const SoaView& src, double* phi, double* gx, double* gy, double* gz) {
  const std::size_t ns = src.n;
  std::size_t zeros = 0;
  const __m512d half = _mm512_set1_pd(0.5), three_halves = _mm512_set1_pd(1.5);
  const __m512d zero = _mm512_setzero_pd();
  for (std::size_t i = 0; i < nt; ++i) {
    const __m512d xi = _mm512_set1_pd(tx[i]), yi = _mm512_set1_pd(ty[i]), zi = _mm512_set1_pd(tz[i]);
    __m512d p = zero, ex = zero, ey = zero, ez = zero;
    for (std::size_t j = 0; j < ns; j += 8) {
      const __mmask8 live = ns - j >= 8 ? __mmask8(0xff) : __mmask8((1u << (ns - j)) - 1u);
      const __m512d dx = _mm512_sub_pd(xi, _mm512_maskz_loadu_pd(live, src.x + j));
      const __m512d dy = _mm512_sub_pd(yi, _mm512_maskz_loadu_pd(live, src.y + j));
      const __m512d dz = _mm512_sub_pd(zi, _mm512_maskz_loadu_pd(live, src.z + j));
      const __m512d q = _mm512_maskz_loadu_pd(live, src.q + j);
      const __m512d r2 = _mm512_fmadd_pd(dz, dz, _mm512_fmadd_pd(dy, dy, _mm512_mul_pd(dx, dx)));
      const __mmask8 nonzero = _mm512_mask_cmp_pd_mask(live, r2, zero, _CMP_NEQ_OQ);
      zeros += std::size_t(__builtin_popcount(unsigned(live & ~nonzero)));
      // reciprocal square root: 14-bit estimate refined twice by Newton's method
      __m512d y = _mm512_maskz_rsqrt14_pd(nonzero, r2);
      const __m512d hr2 = _mm512_mul_pd(half, r2);
      y = _mm512_mul_pd(y, _mm512_fnmadd_pd(hr2, _mm512_mul_pd(y, y), three_halves));
      y = _mm512_mul_pd(y, _mm512_fnmadd_pd(hr2, _mm512_mul_pd(y, y), three_halves));
      const __m512d qi = _mm512_mul_pd(q, y);
      const __m512d qi3 = _mm512_mul_pd(qi, _mm512_mul_pd(y, y));
      p = _mm512_add_pd(p, qi);
      ex = _mm512_fmadd_pd(dx, qi3, ex);
      ey = _mm512_fmadd_pd(dy, qi3, ey);
      ez = _mm512_fmadd_pd(dz, qi3, ez);
    }
    phi[i] += _mm512_reduce_add_pd(p);
    gx[i] += _mm512_reduce_add_pd(ex);
    gy[i] += _mm512_reduce_add_pd(ey);
    gz[i] += _mm512_reduce_add_pd(ez);
  }
  return zeros;
}

#else

std::size_t p2p(const double* tx, const double* ty, const double* tz, std::size_t nt,
                const SoaView& src, double* phi, double* gx, double* gy, double* gz) {
  const double* __restrict sx = src.x;
  const double* __restrict sy = src.y;
  const double* __restrict sz = src.z;
  const double* __restrict sq = src.q;
  const std::size_t ns = src.n;
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < nt; ++i) {
    const double xi = tx[i], yi = ty[i], zi = tz[i];
    double p = 0.0, ex = 0.0, ey = 0.0, ez = 0.0;
    std::size_t hits = 0;
#pragma omp simd reduction(+ : p, ex, ey, ez, hits)
    for (std::size_t j = 0; j < ns; ++j) {
      const double dx = xi - sx[j];
      const double dy = yi - sy[j];
      const double dz = zi - sz[j];
      const double r2 = dx * dx + dy * dy + dz * dz;
      const bool zero = r2 == 0.0;
      const double inv = zero ? 0.0 : 1.0 / std::sqrt(r2);
      const double qi = sq[j] * inv;
      const double qi3 = qi * inv * inv;
      p += qi;
      ex += dx * qi3;
      ey += dy * qi3;
      ez += dz * qi3;
      hits += zero ? 1 : 0;
    }
    phi[i] += p;
    gx[i] += ex;
    gy[i] += ey;
    gz[i] += ez;
    zeros += hits;
  }
  return zeros;
}

#endif

}  // namespace penning::detail
