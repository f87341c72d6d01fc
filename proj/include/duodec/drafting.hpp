#pragma once

#include <span>

#include "duodec/model.hpp"
#include "duodec/types.hpp"

namespace duodec {

struct GreedyExtension {
    std::vector<Token> tokens;
    std::vector<Distribution> dists;
};

// Appends the argmax token `length` times, recording the full next-token
// distribution at every step.
GreedyExtension extend_greedy(const ModelSpec& draft, std::span<const Token> context,
                              int length);

// Uncertainty-driven multi-sequence speculation under a fixed token budget.
//
//   1. Run one draft forward for the position-1 distribution. Probe one
//      greedy step past its top token; the branch threshold is the product of
//      the two top-ranked probabilities of those steps.
//   2. Admit position-1 tokens of rank 2, 3, ... as extra sequences while
//      their probability strictly exceeds the threshold (the ranking is
//      sorted, so the scan stops at the first failure), capped so that
//      s <= max_sequences and every sequence keeps at least one token.
//   3. Split the budget evenly (floor); the top sequence takes the remainder.
//      Sequences are extended autoregressively by sampling from the draft
//      distribution at each step (rng draws in sequence-major order); the
//      probe forward is reused for the top sequence's second position.
//
// Sequences are ordered by descending first-token probability, ties by
// ascending token id; verification consumes them in this order.
DraftBundle draft_dynamic(const ModelSpec& draft, std::span<const Token> context, int budget,
                          int max_sequences, RandomStream& rng);

}  // namespace duodec
