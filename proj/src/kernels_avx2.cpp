// AVX2 kernel variants. Compiled unconditionally on x86-64 via per-function
// target attributes; the dispatcher only installs them after a runtime
// cpuid check, so no AVX2 instruction executes on older CPUs.

#include "duodec/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define DUODEC_HAVE_AVX2_BUILD 1
#include <immintrin.h>
#else
#define DUODEC_HAVE_AVX2_BUILD 0
#endif

namespace duodec::kernels::avx2 {

#if DUODEC_HAVE_AVX2_BUILD

__attribute__((target("avx2,fma"))) static inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

__attribute__((target("avx2,fma"))) double sum(std::span<const double> v) {
    const std::size_t n = v.size();
    std::size_t i = 0;
    __m256d acc = _mm256_setzero_pd();
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_add_pd(acc, _mm256_loadu_pd(v.data() + i));
    }
    double total = hsum(acc);
    for (; i < n; ++i) {
        total += v[i];
    }
    return total;
}

__attribute__((target("avx2,fma"))) void scale(std::span<const double> v, double a,
                                               std::span<double> out) {
    const std::size_t n = v.size();
    std::size_t i = 0;
    const __m256d va = _mm256_set1_pd(a);
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out.data() + i, _mm256_mul_pd(_mm256_loadu_pd(v.data() + i), va));
    }
    for (; i < n; ++i) {
        out[i] = v[i] * a;
    }
}

__attribute__((target("avx2,fma"))) double sub_clamped(std::span<const double> p,
                                                       std::span<const double> q,
                                                       std::span<double> out) {
    const std::size_t n = p.size();
    std::size_t i = 0;
    const __m256d zero = _mm256_setzero_pd();
    __m256d acc = zero;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_max_pd(
            _mm256_sub_pd(_mm256_loadu_pd(p.data() + i), _mm256_loadu_pd(q.data() + i)), zero);
        _mm256_storeu_pd(out.data() + i, d);
        acc = _mm256_add_pd(acc, d);
    }
    double mass = hsum(acc);
    for (; i < n; ++i) {
        const double d = p[i] - q[i];
        const double c = d > 0.0 ? d : 0.0;
        out[i] = c;
        mass += c;
    }
    return mass;
}

__attribute__((target("avx2,fma"))) double abs_diff_sum(std::span<const double> a,
                                                        std::span<const double> b) {
    const std::size_t n = a.size();
    std::size_t i = 0;
    // clear the sign bit to take |x|
    const __m256d absmask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
    __m256d acc = _mm256_setzero_pd();
    for (; i + 4 <= n; i += 4) {
        const __m256d d =
            _mm256_sub_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i));
        acc = _mm256_add_pd(acc, _mm256_and_pd(d, absmask));
    }
    double total = hsum(acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        total += d < 0.0 ? -d : d;
    }
    return total;
}

__attribute__((target("avx2,fma"))) std::size_t argmax(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n < 8) {
        return scalar::argmax(v);
    }
    std::size_t i = 0;
    __m256d best = _mm256_loadu_pd(v.data());
    for (i = 4; i + 4 <= n; i += 4) {
        best = _mm256_max_pd(best, _mm256_loadu_pd(v.data() + i));
    }
    double lanes[4];
    _mm256_storeu_pd(lanes, best);
    double m = lanes[0];
    for (int k = 1; k < 4; ++k) {
        m = lanes[k] > m ? lanes[k] : m;
    }
    for (; i < n; ++i) {
        m = v[i] > m ? v[i] : m;
    }
    // first index holding the maximum preserves the lowest-index tie rule
    for (std::size_t j = 0; j < n; ++j) {
        if (v[j] == m) {
            return j;
        }
    }
    return 0;  // unreachable for NaN-free input
}

#endif  // DUODEC_HAVE_AVX2_BUILD

bool available() {
#if DUODEC_HAVE_AVX2_BUILD
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

}  // namespace duodec::kernels::avx2
