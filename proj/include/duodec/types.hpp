#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "duodec/distribution.hpp"
#include "duodec/random.hpp"

namespace duodec {

// One speculated token run. dists[t] is the draft model's next-token
// distribution at the step that produced tokens[t]; it is kept so the tail
// can be verified in the following iteration.
struct DraftSequence {
    std::vector<Token> tokens;
    std::vector<Distribution> dists;
    // draft probability of tokens[0], i.e. dists[0][tokens[0]]
    double first_token_prob = 0.0;

    std::size_t size() const { return tokens.size(); }
    bool valid() const;
};

// Output of dynamic drafting: s sequences ordered by descending
// first_token_prob (ties by ascending token id), all sharing the draft's
// position-1 distribution. The first tokens are pairwise distinct.
struct DraftBundle {
    std::vector<DraftSequence> sequences;
    Distribution first_dist;
    // branch admission threshold: product of the two top-ranked probabilities
    // along the greedy path (positions 1 and 2)
    double threshold = 0.0;
    // drafted tokens across all sequences; equals the configured budget
    int budget_used = 0;
    // draft-model forward passes actually executed (branch first tokens come
    // from the shared position-1 pass, so this can be below budget_used)
    int forwards_used = 0;

    int sequence_count() const { return static_cast<int>(sequences.size()); }
    bool valid(int budget) const;
};

// Mutable generation state threaded through the engine loops: the verified
// prefix x, the optional unverified tail, and the two role-owned streams.
struct GenerationState {
    std::vector<Token> verified;
    std::optional<DraftSequence> unverified;
    RandomStream rng_draft;
    RandomStream rng_verify;

    std::size_t n() const { return verified.size(); }
};

}  // namespace duodec
