#include "duodec/distribution.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>

#include "duodec/kernels.hpp"

namespace duodec {

Distribution Distribution::from_probs(std::vector<double> probs) {
    Distribution d(std::move(probs));
    if (!d.is_valid()) {
        throw DistributionError("probability vector is negative or does not sum to 1");
    }
    return d;
}

Distribution Distribution::unchecked(std::vector<double> probs) {
    Distribution d(std::move(probs));
    assert(d.is_valid(1e-6) && "unchecked Distribution violates invariants");
    return d;
}

bool Distribution::is_valid(double tol) const noexcept {
    if (probs_.empty()) {
        return false;
    }
    for (double p : probs_) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
            return false;
        }
    }
    return std::abs(kernels::sum(probs_) - 1.0) <= tol;
}

Distribution normalize(std::span<const double> raw) {
    Distribution out;
    if (!try_normalize(raw, out)) {
        throw ZeroMassError("cannot normalize a zero-mass vector");
    }
    return out;
}

bool try_normalize(std::span<const double> raw, Distribution& out) {
    const double mass = kernels::sum(raw);
    if (mass < kZeroMassThreshold) {
        return false;
    }
    std::vector<double> scaled(raw.size());
    kernels::scale(raw, 1.0 / mass, scaled);
    out = Distribution::unchecked(std::move(scaled));
    return true;
}

Token argmax(const Distribution& d) {
    return static_cast<Token>(kernels::argmax(d.probs()));
}

Token sample(const Distribution& d, double u) {
    assert(u >= 0.0 && u < 1.0);
    double acc = 0.0;
    std::size_t last_support = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double p = d[i];
        if (p <= 0.0) {
            continue;
        }
        acc += p;
        last_support = i;
        if (u < acc) {
            return static_cast<Token>(i);
        }
    }
    // u fell into the rounding slack past the accumulated mass
    return static_cast<Token>(last_support);
}

std::vector<Token> ranked_tokens(const Distribution& d) {
    std::vector<Token> ids(d.size());
    std::iota(ids.begin(), ids.end(), 0);
    std::stable_sort(ids.begin(), ids.end(), [&](Token a, Token b) {
        return d[static_cast<std::size_t>(a)] > d[static_cast<std::size_t>(b)];
    });
    return ids;
}

double tv_distance(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    return 0.5 * kernels::abs_diff_sum(a, b);
}

double tv_distance(const Distribution& a, const Distribution& b) {
    return tv_distance(a.probs(), b.probs());
}

}  // namespace duodec
