#include "kickback/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>

namespace kickback::kernels {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_scalar(double* y, double a, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double sum_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

double sum_abs_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::fabs(x[i]);
    return acc;
}

void scale_scalar(double* x, double a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

std::atomic<const Ops*> g_active{nullptr};

const Ops* resolve_default() {
    if (const char* env = std::getenv("KICKBACK_KERNELS")) {
        std::string_view v{env};
        if (v == "scalar") return &scalar_ops;
        if (v == "avx2") {
            if (const Ops* ops = avx2_ops_or_null()) return ops;
            return &scalar_ops;
        }
        // "auto" or anything else falls through
    }
    if (const Ops* ops = avx2_ops_or_null()) return ops;
    return &scalar_ops;
}

} // namespace

const Ops scalar_ops{dot_scalar, axpy_scalar, sum_scalar, sum_abs_scalar, scale_scalar, "scalar"};

const Ops& active() {
    const Ops* ops = g_active.load(std::memory_order_acquire);
    if (!ops) {
        ops = resolve_default();
        g_active.store(ops, std::memory_order_release);
    }
    return *ops;
}

bool select(std::string_view name) {
    if (name == "scalar") {
        g_active.store(&scalar_ops, std::memory_order_release);
        return true;
    }
    if (name == "avx2") {
        if (const Ops* ops = avx2_ops_or_null()) {
            g_active.store(ops, std::memory_order_release);
            return true;
        }
        return false;
    }
    if (name == "auto") {
        g_active.store(nullptr, std::memory_order_release);
        active();
        return true;
    }
    return false;
}

} // namespace kickback::kernels
