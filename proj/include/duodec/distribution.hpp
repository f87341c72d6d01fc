#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace duodec {

// Token ids are plain integers in [0, vocab_size).
using Token = std::int32_t;

// A vector whose sum deviates from 1 by more than this is rejected.
inline constexpr double kNormalizationTolerance = 1e-9;
// Below this total mass a vector cannot be normalized.
inline constexpr double kZeroMassThreshold = 1e-12;

struct DistributionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised by normalize()/residual() when the input mass is (numerically) zero.
// Callers in the verify module fall back to the unsubtracted distribution.
struct ZeroMassError : DistributionError {
    using DistributionError::DistributionError;
};

// Dense probability vector over the vocabulary. Immutable after construction.
class Distribution {
  public:
    Distribution() = default;

    // Validating constructor: entries must be >= 0 and sum to 1 within
    // kNormalizationTolerance.
    static Distribution from_probs(std::vector<double> probs);

    // Trusted constructor for values produced by normalization; only
    // debug-asserts the invariants.
    static Distribution unchecked(std::vector<double> probs);

    std::size_t size() const noexcept { return probs_.size(); }
    bool empty() const noexcept { return probs_.empty(); }
    double operator[](std::size_t i) const noexcept { return probs_[i]; }
    std::span<const double> probs() const noexcept { return probs_; }

    bool is_valid(double tol = kNormalizationTolerance) const noexcept;

    bool operator==(const Distribution& other) const noexcept = default;

  private:
    explicit Distribution(std::vector<double> probs) : probs_(std::move(probs)) {}
    std::vector<double> probs_;
};

// Scales a non-negative vector to sum 1. Throws ZeroMassError when the total
// mass is below kZeroMassThreshold.
Distribution normalize(std::span<const double> raw);

// Non-throwing variant; returns false on zero mass and leaves `out` untouched.
bool try_normalize(std::span<const double> raw, Distribution& out);

// Index of the highest-probability token, ties to the lowest id.
Token argmax(const Distribution& d);

// Inverse-CDF sampling with a single uniform draw u in [0,1). Zero-probability
// tokens are never returned.
Token sample(const Distribution& d, double u);

// Token ids ordered by descending probability, ties by ascending id.
std::vector<Token> ranked_tokens(const Distribution& d);

// Total variation distance: 0.5 * sum |a - b|.
double tv_distance(const Distribution& a, const Distribution& b);
double tv_distance(std::span<const double> a, std::span<const double> b);

}  // namespace duodec
