#pragma once

#include <span>

#include "duodec/types.hpp"

namespace duodec {

// Outcome of verifying last iteration's unverified tail. Replaces the
// sentinel-juggling of the underlying pseudocode (k == 0 for "all accepted",
// k == -1 for "nothing accepted") with explicit cases: `all_accepted` maps to
// the branch that proceeds to bundle verification, `rejected` to the branch
// that resamples at the first failing position and discards the rest.
struct PrefixOutcome {
    bool all_accepted = false;
    // valid when !all_accepted:
    int reject_index = -1;  // oldest-first position of the first rejection
    Token resample = -1;    // drawn from the residual at that position
};

// Outcome of verifying the bundle's first tokens.
struct BundleOutcome {
    bool accepted = false;
    // valid when accepted:
    int seq_index = -1;  // bundle sequence whose first token passed
    // valid when !accepted:
    Token fallback = -1;  // drawn from the residual after all rejections
};

// Core rejection test: accept iff r < p_tok/q_tok, i.e. with probability
// min(1, p/q). r is uniform on [0,1); q_tok must be positive.
bool accept_test(double p_tok, double q_tok, double r);

// norm(max(p - q, 0)). Throws ZeroMassError when p <= q elementwise; callers
// here fall back to sampling from p directly (such a rejection had
// probability zero under exact arithmetic).
Distribution residual(const Distribution& p, const Distribution& q);

// Speculative-sampling check of the tail against the target's distributions
// at the same positions (target_dists[t] conditions on everything before
// tail.tokens[t]). Scans oldest-first; the first failing position rejects,
// discards all later positions, and resamples from that position's residual.
PrefixOutcome verify_prefix(const DraftSequence& tail,
                            std::span<const Distribution> target_dists, RandomStream& rng);

// Sequential acceptance over the bundle's first tokens. The candidates are
// picked deterministically by rank, so the draft's effective proposal for
// each is a unit point mass: sequence i is accepted with probability equal to
// the running residual's mass at its first token, and a rejection removes
// that token's entire mass before renormalizing. This keeps the emitted
// marginal exactly p_next for any bundle. If every sequence is rejected the
// fallback token is drawn from the final residual.
BundleOutcome verify_bundle(const DraftBundle& bundle, const Distribution& p_next,
                            RandomStream& rng);

struct SpsResult {
    int accepted = 0;     // length of the accepted draft prefix
    Token next_token = -1;  // residual resample, or bonus token if all accepted
};

// Classic sequential speculative sampling: accept the longest prefix passing
// accept_test; on the first rejection resample from the residual; if every
// draft token is accepted, sample the bonus token from the last target
// distribution. target_dists must hold draft_tokens.size() + 1 entries, the
// final one being the distribution after the full draft.
SpsResult sps_verify(std::span<const Token> draft_tokens,
                     std::span<const Distribution> draft_dists,
                     std::span<const Distribution> target_dists, RandomStream& rng);

}  // namespace duodec
