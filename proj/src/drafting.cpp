#include "duodec/drafting.hpp"

#include <algorithm>
#include <cassert>

namespace duodec {

bool DraftSequence::valid() const {
    if (tokens.empty() || tokens.size() != dists.size()) {
        return false;
    }
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        if (tokens[t] < 0 || static_cast<std::size_t>(tokens[t]) >= dists[t].size()) {
            return false;
        }
        if (!(dists[t][static_cast<std::size_t>(tokens[t])] > 0.0)) {
            return false;
        }
    }
    return first_token_prob == dists[0][static_cast<std::size_t>(tokens[0])];
}

bool DraftBundle::valid(int budget) const {
    if (sequences.empty() || threshold < 0.0 || threshold > 1.0) {
        return false;
    }
    int total = 0;
    for (std::size_t i = 0; i < sequences.size(); ++i) {
        const DraftSequence& seq = sequences[i];
        if (!seq.valid()) {
            return false;
        }
        total += static_cast<int>(seq.size());
        if (i > 0) {
            const DraftSequence& prev = sequences[i - 1];
            const bool ordered = seq.first_token_prob < prev.first_token_prob ||
                                 (seq.first_token_prob == prev.first_token_prob &&
                                  seq.tokens[0] > prev.tokens[0]);
            if (!ordered) {
                return false;
            }
            if (!(seq.first_token_prob > threshold)) {
                return false;
            }
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (sequences[j].tokens[0] == seq.tokens[0]) {
                return false;
            }
        }
    }
    return total == budget_used && budget_used <= budget;
}

GreedyExtension extend_greedy(const ModelSpec& draft, std::span<const Token> context,
                              int length) {
    GreedyExtension out;
    out.tokens.reserve(static_cast<std::size_t>(std::max(length, 0)));
    out.dists.reserve(out.tokens.capacity());
    std::vector<Token> ctx(context.begin(), context.end());
    for (int i = 0; i < length; ++i) {
        const Distribution& d = draft.forward(ctx);
        const Token t = argmax(d);
        out.tokens.push_back(t);
        out.dists.push_back(d);
        ctx.push_back(t);
    }
    return out;
}

DraftBundle draft_dynamic(const ModelSpec& draft, std::span<const Token> context, int budget,
                          int max_sequences, RandomStream& rng) {
    assert(budget >= 2 && "budget must be >= 2 so the threshold is computable");
    assert(max_sequences >= 1);

    DraftBundle bundle;

    const Distribution& first = draft.forward(context);
    const std::vector<Token> ranks = ranked_tokens(first);
    const Token top = ranks[0];
    const double p_top = first[static_cast<std::size_t>(top)];

    // one greedy probe step past the top token defines the threshold
    std::vector<Token> probe_ctx(context.begin(), context.end());
    probe_ctx.push_back(top);
    const Distribution& probe = draft.forward(probe_ctx);
    const double p_second = probe[static_cast<std::size_t>(argmax(probe))];
    bundle.threshold = p_top * p_second;
    int forwards = 2;

    // a sequence is only worth admitting if it gets at least one token
    const int s_cap = std::min(max_sequences, budget);
    std::vector<Token> firsts{top};
    for (std::size_t r = 1; r < ranks.size() && static_cast<int>(firsts.size()) < s_cap; ++r) {
        if (!(first[static_cast<std::size_t>(ranks[r])] > bundle.threshold)) {
            break;  // ranks are sorted; no later rank can pass
        }
        firsts.push_back(ranks[r]);
    }

    const int s = static_cast<int>(firsts.size());
    const int base_len = budget / s;
    const int remainder = budget - base_len * s;

    bundle.sequences.reserve(static_cast<std::size_t>(s));
    for (int i = 0; i < s; ++i) {
        const int len = base_len + (i == 0 ? remainder : 0);
        DraftSequence seq;
        seq.tokens.reserve(static_cast<std::size_t>(len));
        seq.dists.reserve(static_cast<std::size_t>(len));
        seq.tokens.push_back(firsts[static_cast<std::size_t>(i)]);
        seq.dists.push_back(first);
        seq.first_token_prob = first[static_cast<std::size_t>(firsts[static_cast<std::size_t>(i)])];

        std::vector<Token> ctx(context.begin(), context.end());
        ctx.push_back(seq.tokens[0]);
        for (int pos = 1; pos < len; ++pos) {
            const bool reuse_probe = (i == 0 && pos == 1);
            const Distribution& d = reuse_probe ? probe : draft.forward(ctx);
            if (!reuse_probe) {
                ++forwards;
            }
            const Token t = sample(d, rng.next_uniform());
            seq.tokens.push_back(t);
            seq.dists.push_back(d);
            ctx.push_back(t);
        }
        bundle.sequences.push_back(std::move(seq));
    }

    bundle.first_dist = first;
    bundle.budget_used = budget;
    bundle.forwards_used = forwards;
    assert(bundle.valid(budget));
    return bundle;
}

}  // namespace duodec
