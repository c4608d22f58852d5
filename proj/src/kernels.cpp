#include "gift/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

#include "gift/errors.hpp"

namespace gift::kern {

namespace {

void s_add(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void s_sub(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void s_mul(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void s_scale(const double* a, double c, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * c;
}

void s_axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}

void s_square(const double* a, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * a[i];
}

void s_lerp(const double* a, const double* b, double w, double* out, std::size_t n) {
    const double wa = 1.0 - w;
    for (std::size_t i = 0; i < n; ++i) out[i] = wa * a[i] + w * b[i];
}

double s_dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double s_sum(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}

double s_max(const double* a, std::size_t n) {
    double best = a[0];
    for (std::size_t i = 1; i < n; ++i)
        if (a[i] > best) best = a[i];
    return best;
}

double s_sqdiff_sum(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

double s_weighted_sqdiff_sum(const double* f, const double* a, const double* b,
                             std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        acc += f[i] * (d * d);
    }
    return acc;
}

void s_adamw(double* theta, double* m, double* v, const double* g, std::size_t n,
             double lr, double beta1, double beta2, double eps,
             double weight_decay, double bias1, double bias2) {
    const double decay = 1.0 - lr * weight_decay;
    const double omb1 = 1.0 - beta1;
    const double omb2 = 1.0 - beta2;
    for (std::size_t i = 0; i < n; ++i) {
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

const Ops scalar_table = {
    "scalar", s_add,  s_sub, s_mul, s_scale,      s_axpy,
    s_square, s_lerp, s_dot, s_sum, s_max,        s_sqdiff_sum,
    s_weighted_sqdiff_sum, s_adamw,
};

} // namespace

const Ops& scalar_ops() { return scalar_table; }

namespace detail {
const Ops* avx2_table(); // defined in kernels_avx2.cpp when compiled in
}

const Ops* avx2_ops() {
#ifdef GIFT_HAVE_AVX2_TU
    static const Ops* table =
        __builtin_cpu_supports("avx2") ? detail::avx2_table() : nullptr;
    return table;
#else
    return nullptr;
#endif
}

const Ops& active() {
    static const Ops& chosen = []() -> const Ops& {
        const char* env = std::getenv("GIFT_KERNELS");
        const std::string want = env ? env : "auto";
        if (want == "scalar") return scalar_ops();
        const Ops* a2 = avx2_ops();
        if (want == "avx2") {
            if (!a2) throw ConfigError("GIFT_KERNELS=avx2: AVX2 not available on this machine");
            return *a2;
        }
        if (want != "auto")
            throw ConfigError("GIFT_KERNELS must be scalar, avx2, or auto (got '" + want + "')");
        return a2 ? *a2 : scalar_ops();
    }();
    return chosen;
}

std::vector<const Ops*> all_available() {
    std::vector<const Ops*> out{&scalar_ops()};
    if (const Ops* a2 = avx2_ops()) out.push_back(a2);
    return out;
}

} // namespace gift::kern
