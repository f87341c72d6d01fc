#include "duodec/kernels.hpp"

#include <algorithm>

namespace duodec::kernels::scalar {

double sum(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) {
        acc += x;
    }
    return acc;
}

void scale(std::span<const double> v, double a, std::span<double> out) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = v[i] * a;
    }
}

double sub_clamped(std::span<const double> p, std::span<const double> q,
                   std::span<double> out) {
    double mass = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = std::max(p[i] - q[i], 0.0);
        out[i] = d;
        mass += d;
    }
    return mass;
}

double abs_diff_sum(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += std::abs(a[i] - b[i]);
    }
    return acc;
}

std::size_t argmax(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) {
            best = i;
        }
    }
    return best;
}

}  // namespace duodec::kernels::scalar
