#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Dense arithmetic kernels for probability vectors. Every kernel has a scalar
// reference implementation and, on x86-64 with AVX2, a vectorized variant.
// The backend is picked once at startup (override with select_backend() or
// the DUODEC_KERNELS environment variable: "scalar" | "avx2" | "auto").
//
// All kernels are NaN-free by contract: inputs are probabilities.

namespace duodec::kernels {

enum class Backend {
    scalar,
    avx2,
};

Backend active_backend();
bool backend_supported(Backend b);
// Returns false (and leaves the backend unchanged) if b is unsupported.
bool select_backend(Backend b);
std::string_view backend_name(Backend b);

// sum of all elements
double sum(std::span<const double> v);

// out[i] = v[i] * a; in-place allowed (out == v)
void scale(std::span<const double> v, double a, std::span<double> out);

// out[i] = max(p[i] - q[i], 0); returns sum(out). The residual numerator of
// speculative sampling. In-place allowed (out == p).
double sub_clamped(std::span<const double> p, std::span<const double> q,
                   std::span<double> out);

// sum(|a[i] - b[i]|), the L1 distance (2x total variation)
double abs_diff_sum(std::span<const double> a, std::span<const double> b);

// index of the maximum element; ties resolve to the lowest index
std::size_t argmax(std::span<const double> v);

// Reference kernels, always available regardless of the active backend.
// The equivalence tests compare the dispatched kernels against these.
namespace scalar {
double sum(std::span<const double> v);
void scale(std::span<const double> v, double a, std::span<double> out);
double sub_clamped(std::span<const double> p, std::span<const double> q,
                   std::span<double> out);
double abs_diff_sum(std::span<const double> a, std::span<const double> b);
std::size_t argmax(std::span<const double> v);
}  // namespace scalar

}  // namespace duodec::kernels
