// AVX2 variants of the kernel table. Elementwise kernels mirror the scalar
// reference operation-for-operation (mul then add, never FMA) so results are
// bitwise identical; reductions run four fixed lanes plus a scalar tail.

#include "gift/kernels.hpp"

#if defined(__AVX2__)

#include <immintrin.h>

#include <cmath>
#include <cstddef>

namespace gift::kern {
namespace {

void a_add(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void a_sub(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void a_mul(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void a_scale(const double* a, double c, double* out, std::size_t n) {
    const __m256d vc = _mm256_set1_pd(c);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), vc));
    }
    for (; i < n; ++i) out[i] = a[i] * c;
}

void a_axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

void a_square(const double* a, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(a + i);
        _mm256_storeu_pd(out + i, _mm256_mul_pd(v, v));
    }
    for (; i < n; ++i) out[i] = a[i] * a[i];
}

void a_lerp(const double* a, const double* b, double w, double* out, std::size_t n) {
    const double wa = 1.0 - w;
    const __m256d vwa = _mm256_set1_pd(wa);
    const __m256d vw = _mm256_set1_pd(w);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d ta = _mm256_mul_pd(vwa, _mm256_loadu_pd(a + i));
        const __m256d tb = _mm256_mul_pd(vw, _mm256_loadu_pd(b + i));
        _mm256_storeu_pd(out + i, _mm256_add_pd(ta, tb));
    }
    for (; i < n; ++i) out[i] = wa * a[i] + w * b[i];
}

// (lane0 + lane1) + (lane2 + lane3)
double hsum(__m256d v) {
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, v);
    return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

double a_dot(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                               _mm256_loadu_pd(b + i)));
    }
    double tail = 0.0;
    for (; i < n; ++i) tail += a[i] * b[i];
    return hsum(acc) + tail;
}

double a_sum(const double* a, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
    double tail = 0.0;
    for (; i < n; ++i) tail += a[i];
    return hsum(acc) + tail;
}

double a_max(const double* a, std::size_t n) {
    double best = a[0];
    std::size_t i = 0;
    if (n >= 4) {
        __m256d vbest = _mm256_loadu_pd(a);
        for (i = 4; i + 4 <= n; i += 4)
            vbest = _mm256_max_pd(vbest, _mm256_loadu_pd(a + i));
        alignas(32) double lanes[4];
        _mm256_store_pd(lanes, vbest);
        best = lanes[0];
        for (int k = 1; k < 4; ++k)
            if (lanes[k] > best) best = lanes[k];
    }
    for (; i < n; ++i)
        if (a[i] > best) best = a[i];
    return best;
}

double a_sqdiff_sum(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    double tail = 0.0;
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        tail += d * d;
    }
    return hsum(acc) + tail;
}

double a_weighted_sqdiff_sum(const double* f, const double* a, const double* b,
                             std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        const __m256d d2 = _mm256_mul_pd(d, d);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(f + i), d2));
    }
    double tail = 0.0;
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        tail += f[i] * (d * d);
    }
    return hsum(acc) + tail;
}

void a_adamw(double* theta, double* m, double* v, const double* g, std::size_t n,
             double lr, double beta1, double beta2, double eps,
             double weight_decay, double bias1, double bias2) {
    const double decay = 1.0 - lr * weight_decay;
    const double omb1 = 1.0 - beta1;
    const double omb2 = 1.0 - beta2;
    const __m256d vdecay = _mm256_set1_pd(decay);
    const __m256d vb1 = _mm256_set1_pd(beta1);
    const __m256d vomb1 = _mm256_set1_pd(omb1);
    const __m256d vb2 = _mm256_set1_pd(beta2);
    const __m256d vomb2 = _mm256_set1_pd(omb2);
    const __m256d vbias1 = _mm256_set1_pd(bias1);
    const __m256d vbias2 = _mm256_set1_pd(bias2);
    const __m256d veps = _mm256_set1_pd(eps);
    const __m256d vlr = _mm256_set1_pd(lr);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gi = _mm256_loadu_pd(g + i);
        const __m256d th = _mm256_mul_pd(_mm256_loadu_pd(theta + i), vdecay);
        const __m256d mi = _mm256_add_pd(_mm256_mul_pd(vb1, _mm256_loadu_pd(m + i)),
                                         _mm256_mul_pd(vomb1, gi));
        const __m256d g2 = _mm256_mul_pd(gi, gi);
        const __m256d vi = _mm256_add_pd(_mm256_mul_pd(vb2, _mm256_loadu_pd(v + i)),
                                         _mm256_mul_pd(vomb2, g2));
        const __m256d mhat = _mm256_mul_pd(mi, vbias1);
        const __m256d vhat = _mm256_mul_pd(vi, vbias2);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
        const __m256d upd = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), denom);
        _mm256_storeu_pd(theta + i, _mm256_sub_pd(th, upd));
        _mm256_storeu_pd(m + i, mi);
        _mm256_storeu_pd(v + i, vi);
    }
    for (; i < n; ++i) {
        const double th = theta[i] * decay;
        const double mi = beta1 * m[i] + omb1 * g[i];
        const double g2 = g[i] * g[i];
        const double vi = beta2 * v[i] + omb2 * g2;
        const double mhat = mi * bias1;
        const double vhat = vi * bias2;
        const double denom = std::sqrt(vhat) + eps;
        theta[i] = th - (lr * mhat) / denom;
        m[i] = mi;
        v[i] = vi;
    }
}

const Ops avx2_table_impl = {
    "avx2",   a_add,  a_sub, a_mul, a_scale,      a_axpy,
    a_square, a_lerp, a_dot, a_sum, a_max,        a_sqdiff_sum,
    a_weighted_sqdiff_sum, a_adamw,
};

} // namespace

namespace detail {
const Ops* avx2_table() { return &avx2_table_impl; }
}

} // namespace gift::kern

#else

namespace gift::kern::detail {
const Ops* avx2_table() { return nullptr; }
}

#endif // __AVX2__
