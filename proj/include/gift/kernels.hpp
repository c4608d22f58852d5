#pragma once

#include <cstddef>
#include <vector>

namespace gift::kern {

// Table of the arithmetic inner loops everything else is built from.
//
// Elementwise kernels (add .. adamw) are specified operation-by-operation so
// that scalar and SIMD variants produce bitwise-identical results: no FMA, no
// reassociation, only correctly-rounded IEEE ops in a fixed order. Reduction
// kernels (dot .. weighted_sqdiff_sum) keep a fixed lane/accumulation order,
// which makes each variant deterministic, but scalar and SIMD reductions may
// legitimately differ in the last few ulps.
struct Ops {
    const char* name;

    void (*add)(const double* a, const double* b, double* out, std::size_t n);
    void (*sub)(const double* a, const double* b, double* out, std::size_t n);
    void (*mul)(const double* a, const double* b, double* out, std::size_t n);
    void (*scale)(const double* a, double c, double* out, std::size_t n);
    // y += a * x
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    void (*square)(const double* a, double* out, std::size_t n);
    // out = (1 - w) * a + w * b
    void (*lerp)(const double* a, const double* b, double w, double* out, std::size_t n);

    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sum)(const double* a, std::size_t n);
    double (*max)(const double* a, std::size_t n);
    // sum_i (a_i - b_i)^2
    double (*sqdiff_sum)(const double* a, const double* b, std::size_t n);
    // sum_i f_i * (a_i - b_i)^2
    double (*weighted_sqdiff_sum)(const double* f, const double* a, const double* b,
                                  std::size_t n);

    // Decoupled-weight-decay adaptive-moment step; decay is applied
    // multiplicatively before the update. bias1/bias2 are the precomputed
    // 1/(1-beta^t) corrections.
    void (*adamw)(double* theta, double* m, double* v, const double* g, std::size_t n,
                  double lr, double beta1, double beta2, double eps,
                  double weight_decay, double bias1, double bias2);
};

const Ops& scalar_ops();

// nullptr when AVX2 is unavailable (either not compiled in or not supported
// by the running CPU).
const Ops* avx2_ops();

// Active table, resolved once per process: best available variant, or the one
// named by GIFT_KERNELS=scalar|avx2|auto.
const Ops& active();

// Every variant usable on this machine; equivalence tests iterate over these.
std::vector<const Ops*> all_available();

} // namespace gift::kern
