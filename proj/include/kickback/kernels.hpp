#pragma once

// Dense double-precision kernels used by the forward/feedback/update loops.
// A scalar reference implementation always exists; an AVX2+FMA variant is
// compiled on x86-64 and selected at runtime when the CPU supports it.
// Dispatch is fixed once per process, so repeated runs on the same machine
// (and both algorithms within one run) go through identical arithmetic.

#include <cstddef>
#include <string_view>

namespace kickback::kernels {

struct Ops {
    // dot(a, b, n) = sum_i a[i] * b[i]
    double (*dot)(const double*, const double*, std::size_t);
    // axpy: y[i] += a * x[i]
    void (*axpy)(double*, double, const double*, std::size_t);
    // sum(x, n) = sum_i x[i]
    double (*sum)(const double*, std::size_t);
    // sum_abs(x, n) = sum_i |x[i]|
    double (*sum_abs)(const double*, std::size_t);
    // scale: x[i] *= a
    void (*scale)(double*, double, std::size_t);
    const char* name;
};

extern const Ops scalar_ops;

// nullptr when the binary was built without AVX2 support or the CPU lacks it.
const Ops* avx2_ops_or_null();

// Active dispatch table. Resolved on first use: AVX2 when available, else
// scalar. The environment variable KICKBACK_KERNELS=scalar|avx2|auto forces
// a choice before first use.
const Ops& active();

// Force a specific implementation ("scalar", "avx2", "auto").
// Returns false (and leaves dispatch unchanged) if unavailable.
bool select(std::string_view name);

inline double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
inline void axpy(double* y, double a, const double* x, std::size_t n) { active().axpy(y, a, x, n); }
inline double sum(const double* x, std::size_t n) { return active().sum(x, n); }
inline double sum_abs(const double* x, std::size_t n) { return active().sum_abs(x, n); }
inline void scale(double* x, double a, std::size_t n) { active().scale(x, a, n); }

} // namespace kickback::kernels
