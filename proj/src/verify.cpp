#include "duodec/verify.hpp"

#include <cassert>

#include "duodec/kernels.hpp"

namespace duodec {

namespace {

// residual with the zero-mass fallback: when p <= q elementwise the rejection
// that led here had probability zero, so p itself is the right law
Distribution residual_or_p(const Distribution& p, const Distribution& q) {
    std::vector<double> buf(p.size());
    const double mass = kernels::sub_clamped(p.probs(), q.probs(), buf);
    if (mass < kZeroMassThreshold) {
        return p;
    }
    kernels::scale(buf, 1.0 / mass, buf);
    return Distribution::unchecked(std::move(buf));
}

}  // namespace

bool accept_test(double p_tok, double q_tok, double r) {
    assert(q_tok > 0.0 && "drafted tokens always carry positive draft probability");
    return r < p_tok / q_tok;
}

Distribution residual(const Distribution& p, const Distribution& q) {
    assert(p.size() == q.size());
    std::vector<double> buf(p.size());
    const double mass = kernels::sub_clamped(p.probs(), q.probs(), buf);
    if (mass < kZeroMassThreshold) {
        throw ZeroMassError("residual has zero mass (p <= q elementwise)");
    }
    kernels::scale(buf, 1.0 / mass, buf);
    return Distribution::unchecked(std::move(buf));
}

PrefixOutcome verify_prefix(const DraftSequence& tail,
                            std::span<const Distribution> target_dists, RandomStream& rng) {
    assert(tail.size() == target_dists.size());
    for (std::size_t j = 0; j < tail.size(); ++j) {
        const auto tok = static_cast<std::size_t>(tail.tokens[j]);
        const double p_tok = target_dists[j][tok];
        const double q_tok = tail.dists[j][tok];
        const double r = rng.next_uniform();
        if (!accept_test(p_tok, q_tok, r)) {
            const Distribution res = residual_or_p(target_dists[j], tail.dists[j]);
            PrefixOutcome out;
            out.all_accepted = false;
            out.reject_index = static_cast<int>(j);
            out.resample = sample(res, rng.next_uniform());
            return out;
        }
    }
    PrefixOutcome out;
    out.all_accepted = true;
    return out;
}

BundleOutcome verify_bundle(const DraftBundle& bundle, const Distribution& p_next,
                            RandomStream& rng) {
    std::vector<double> cur(p_next.probs().begin(), p_next.probs().end());
    for (int i = 0; i < bundle.sequence_count(); ++i) {
        const auto tok = static_cast<std::size_t>(bundle.sequences[static_cast<std::size_t>(i)].tokens[0]);
        const double r = rng.next_uniform();
        if (accept_test(cur[tok], 1.0, r)) {
            BundleOutcome out;
            out.accepted = true;
            out.seq_index = i;
            return out;
        }
        // remove the rejected candidate's mass and renormalize
        cur[tok] = 0.0;
        const double mass = kernels::sum(cur);
        if (mass < kZeroMassThreshold) {
            // reachable only through floating-point underflow: the rejection
            // had probability zero, fall back to p_next
            cur.assign(p_next.probs().begin(), p_next.probs().end());
        } else {
            kernels::scale(cur, 1.0 / mass, cur);
        }
    }
    BundleOutcome out;
    out.accepted = false;
    out.fallback = sample(Distribution::unchecked(std::move(cur)), rng.next_uniform());
    return out;
}

SpsResult sps_verify(std::span<const Token> draft_tokens,
                     std::span<const Distribution> draft_dists,
                     std::span<const Distribution> target_dists, RandomStream& rng) {
    assert(draft_tokens.size() == draft_dists.size());
    assert(target_dists.size() == draft_tokens.size() + 1);
    for (std::size_t j = 0; j < draft_tokens.size(); ++j) {
        const auto tok = static_cast<std::size_t>(draft_tokens[j]);
        const double r = rng.next_uniform();
        if (!accept_test(target_dists[j][tok], draft_dists[j][tok], r)) {
            const Distribution res = residual_or_p(target_dists[j], draft_dists[j]);
            return SpsResult{static_cast<int>(j), sample(res, rng.next_uniform())};
        }
    }
    const Distribution& bonus = target_dists[draft_tokens.size()];
    return SpsResult{static_cast<int>(draft_tokens.size()), sample(bonus, rng.next_uniform())};
}

}  // namespace duodec
