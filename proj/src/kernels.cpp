#include "duodec/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace duodec::kernels {

namespace avx2 {
bool available();
double sum(std::span<const double> v);
void scale(std::span<const double> v, double a, std::span<double> out);
double sub_clamped(std::span<const double> p, std::span<const double> q, std::span<double> out);
double abs_diff_sum(std::span<const double> a, std::span<const double> b);
std::size_t argmax(std::span<const double> v);
}  // namespace avx2

namespace {

struct KernelTable {
    Backend backend;
    double (*sum)(std::span<const double>);
    void (*scale)(std::span<const double>, double, std::span<double>);
    double (*sub_clamped)(std::span<const double>, std::span<const double>, std::span<double>);
    double (*abs_diff_sum)(std::span<const double>, std::span<const double>);
    std::size_t (*argmax)(std::span<const double>);
};

constexpr KernelTable kScalarTable = {
    Backend::scalar, &scalar::sum,          &scalar::scale,
    &scalar::sub_clamped, &scalar::abs_diff_sum, &scalar::argmax,
};

#if defined(__x86_64__) || defined(_M_X64)
constexpr KernelTable kAvx2Table = {
    Backend::avx2,      &avx2::sum,          &avx2::scale,
    &avx2::sub_clamped, &avx2::abs_diff_sum, &avx2::argmax,
};
#endif

const KernelTable* table_for(Backend b) {
#if defined(__x86_64__) || defined(_M_X64)
    if (b == Backend::avx2) {
        return &kAvx2Table;
    }
#else
    (void)b;
#endif
    return &kScalarTable;
}

Backend initial_backend() {
    if (const char* env = std::getenv("DUODEC_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) {
            return Backend::scalar;
        }
        if (std::strcmp(env, "avx2") == 0 && avx2::available()) {
            return Backend::avx2;
        }
        // "auto" or anything unrecognized falls through to detection
    }
    return avx2::available() ? Backend::avx2 : Backend::scalar;
}

std::atomic<const KernelTable*> g_table{table_for(initial_backend())};

const KernelTable& table() { return *g_table.load(std::memory_order_relaxed); }

}  // namespace

Backend active_backend() { return table().backend; }

bool backend_supported(Backend b) {
    return b == Backend::scalar || (b == Backend::avx2 && avx2::available());
}

bool select_backend(Backend b) {
    if (!backend_supported(b)) {
        return false;
    }
    g_table.store(table_for(b), std::memory_order_relaxed);
    return true;
}

std::string_view backend_name(Backend b) {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
    }
    return "unknown";
}

double sum(std::span<const double> v) { return table().sum(v); }

void scale(std::span<const double> v, double a, std::span<double> out) {
    table().scale(v, a, out);
}

double sub_clamped(std::span<const double> p, std::span<const double> q, std::span<double> out) {
    return table().sub_clamped(p, q, out);
}

double abs_diff_sum(std::span<const double> a, std::span<const double> b) {
    return table().abs_diff_sum(a, b);
}

std::size_t argmax(std::span<const double> v) { return table().argmax(v); }

}  // namespace duodec::kernels
