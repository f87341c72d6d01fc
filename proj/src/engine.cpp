#include "duodec/engine.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <condition_variable>
#include <mutex>
#include <thread>

namespace duodec {

namespace {

using SteadyClock = std::chrono::steady_clock;

double elapsed_ms(SteadyClock::time_point since) {
    return std::chrono::duration<double, std::milli>(SteadyClock::now() - since).count();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void check_prompt(const ModelSpec& model, std::span<const Token> prompt) {
    for (Token t : prompt) {
        if (t < 0 || t >= model.vocab_size()) {
            throw ConfigError("prompt token " + std::to_string(t) + " outside vocabulary");
        }
    }
}

// target dists at every candidate position plus the next position after all
// of them; the simulator bills this as one pass of width candidates+1
std::vector<Distribution> scored_with_next(const ModelSpec& model, std::span<const Token> context,
                                           std::span<const Token> candidates) {
    std::vector<Distribution> out = model.forward_scored(context, candidates);
    std::vector<Token> full(context.begin(), context.end());
    full.insert(full.end(), candidates.begin(), candidates.end());
    out.push_back(model.forward(full));
    return out;
}

DraftSequence tail_of(const DraftSequence& seq) {
    DraftSequence t;
    t.tokens.assign(seq.tokens.begin() + 1, seq.tokens.end());
    t.dists.assign(seq.dists.begin() + 1, seq.dists.end());
    t.first_token_prob = t.dists[0][static_cast<std::size_t>(t.tokens[0])];
    return t;
}

struct ApplyResult {
    int committed = 0;
    int accepted = 0;
};

// Verification step of one duo iteration, run on the target side after the
// rendezvous. Verifies the deferred tail first; only a fully accepted (or
// absent) tail lets the bundle be used — a tail rejection invalidates the
// bundle's conditioning prefix, so it is dropped.
ApplyResult apply_verification(GenerationState& state, DraftBundle&& bundle,
                               const std::vector<Distribution>& target_dists) {
    ApplyResult res;
    bool bundle_usable = true;
    if (state.unverified) {
        const DraftSequence& tail = *state.unverified;
        const std::size_t len = tail.size();
        assert(target_dists.size() == len + 1);
        const PrefixOutcome outcome =
            verify_prefix(tail, std::span(target_dists).first(len), state.rng_verify);
        if (outcome.all_accepted) {
            state.verified.insert(state.verified.end(), tail.tokens.begin(), tail.tokens.end());
            res.committed += static_cast<int>(len);
            res.accepted += static_cast<int>(len);
        } else {
            const auto keep = static_cast<std::size_t>(outcome.reject_index);
            state.verified.insert(state.verified.end(), tail.tokens.begin(),
                                  tail.tokens.begin() + static_cast<std::ptrdiff_t>(keep));
            state.verified.push_back(outcome.resample);
            res.committed += static_cast<int>(keep) + 1;
            res.accepted += static_cast<int>(keep);
            bundle_usable = false;
        }
        state.unverified.reset();
    }

    if (bundle_usable) {
        const Distribution& p_next = target_dists.back();
        const BundleOutcome outcome = verify_bundle(bundle, p_next, state.rng_verify);
        if (outcome.accepted) {
            DraftSequence& seq = bundle.sequences[static_cast<std::size_t>(outcome.seq_index)];
            state.verified.push_back(seq.tokens[0]);
            res.committed += 1;
            res.accepted += 1;
            if (seq.size() > 1) {
                state.unverified = tail_of(seq);
            }
        } else {
            state.verified.push_back(outcome.fallback);
            res.committed += 1;
        }
    }
    assert(res.committed >= 1 && "every iteration verifies at least one token");
    return res;
}

int resolve_budget(const ModelSpec& target, const ModelSpec& draft, const EngineConfig& cfg,
                   Timeline& timeline) {
    if (cfg.budget_policy == BudgetPolicy::fixed) {
        return cfg.budget;
    }
    const double c = calibrate(target, draft, cfg.calib_probe_len, cfg.calib_trials, timeline);
    return std::min(choose_budget(c), cfg.budget_hard_cap);
}

void finish_result(GenerationResult& r, std::size_t prompt_len, std::size_t verified_len,
                   double total_ms) {
    r.total_ms = total_ms;
    const auto generated = static_cast<double>(verified_len - prompt_len);
    r.tps = total_ms > 0.0 ? generated / (total_ms / 1000.0) : 0.0;
}

// One draft-worker step: bundle plus its simulated/wall cost.
struct DraftStep {
    DraftBundle bundle;
    double ms = 0.0;
};

DraftStep draft_step(const ModelSpec& draft, const std::vector<Token>& prefix,
                     int budget, int max_sequences, RandomStream& rng,
                     const DeviceProfile* profile) {
    const auto t0 = SteadyClock::now();
    DraftStep step;
    step.bundle = draft_dynamic(draft, prefix, budget, max_sequences, rng);
    step.ms = profile ? profile->draft_ms(step.bundle.forwards_used) : elapsed_ms(t0);
    return step;
}

struct TargetStep {
    std::vector<Distribution> dists;  // tail positions + the next position
    double ms = 0.0;
};

TargetStep target_step(const ModelSpec& target, const GenerationState& state,
                       const DeviceProfile* profile) {
    const auto t0 = SteadyClock::now();
    TargetStep step;
    std::span<const Token> tail_tokens;
    if (state.unverified) {
        tail_tokens = state.unverified->tokens;
    }
    step.dists = scored_with_next(target, state.verified, tail_tokens);
    const int width = static_cast<int>(tail_tokens.size()) + 1;
    step.ms = profile ? profile->target_pass_ms(width) : elapsed_ms(t0);
    return step;
}

// Single-slot rendezvous channel between the target (owner) and the draft
// worker: prefix request down, bundle reply up, one message pair per
// iteration.
struct DuoChannel {
    std::mutex mutex;
    std::condition_variable cv;
    bool has_request = false;
    bool has_reply = false;
    bool stop = false;
    std::vector<Token> prefix;
    DraftStep reply;
    std::exception_ptr worker_error;

    void post_request(std::vector<Token> z) {
        {
            std::lock_guard lock(mutex);
            prefix = std::move(z);
            has_request = true;
        }
        cv.notify_all();
    }

    bool wait_request(std::vector<Token>& z) {
        std::unique_lock lock(mutex);
        cv.wait(lock, [&] { return has_request || stop; });
        if (stop) {
            return false;
        }
        z = std::move(prefix);
        has_request = false;
        return true;
    }

    void post_reply(DraftStep step) {
        {
            std::lock_guard lock(mutex);
            reply = std::move(step);
            has_reply = true;
        }
        cv.notify_all();
    }

    DraftStep wait_reply() {
        std::unique_lock lock(mutex);
        cv.wait(lock, [&] { return has_reply || worker_error; });
        if (worker_error) {
            std::rethrow_exception(worker_error);
        }
        has_reply = false;
        return std::move(reply);
    }

    void post_stop() {
        {
            std::lock_guard lock(mutex);
            stop = true;
        }
        cv.notify_all();
    }

    void post_error(std::exception_ptr e) {
        {
            std::lock_guard lock(mutex);
            worker_error = std::move(e);
        }
        cv.notify_all();
    }
};

}  // namespace

void EngineConfig::validate() const {
    if (budget < 2) {
        throw ConfigError("budget must be >= 2");
    }
    if (budget > budget_hard_cap) {
        throw ConfigError("budget exceeds the hard cap (" + std::to_string(budget_hard_cap) + ")");
    }
    if (max_sequences < 1) {
        throw ConfigError("max_sequences must be >= 1");
    }
    if (max_new_tokens < 1) {
        throw ConfigError("max_new_tokens must be >= 1");
    }
    if (!(temperature > 0.0)) {
        throw ConfigError("temperature must be positive");
    }
    if (budget_policy == BudgetPolicy::calibrated && calib_trials < 10) {
        throw ConfigError("calibration requires trials >= 10");
    }
}

Timeline Timeline::simulated(const DeviceProfile& profile) {
    Timeline t;
    t.clock_.emplace(profile);
    return t;
}

Timeline Timeline::wall() { return Timeline{}; }

double Timeline::now_ms() const {
    if (clock_) {
        return clock_->now_ms();
    }
    return std::chrono::duration<double, std::milli>(SteadyClock::now() - epoch_).count();
}

void Timeline::reset() {
    if (clock_) {
        clock_.emplace(clock_->profile());
    }
    epoch_ = SteadyClock::now();
}

GenerationResult run_vanilla(const ModelSpec& target, std::span<const Token> prompt,
                             const EngineConfig& config, Timeline& timeline) {
    config.validate();
    check_prompt(target, prompt);
    const ModelSpec tempered =
        config.temperature != 1.0 ? target.with_temperature(config.temperature) : ModelSpec{};
    const ModelSpec& model = config.temperature != 1.0 ? tempered : target;

    timeline.reset();
    GenerationResult result;
    GenerationState state;
    state.verified.assign(prompt.begin(), prompt.end());
    state.rng_verify = RandomStream(config.verify_seed);
    const std::size_t prompt_len = prompt.size();

    while (state.n() - prompt_len < static_cast<std::size_t>(config.max_new_tokens)) {
        const auto t0 = SteadyClock::now();
        const Distribution& dist = model.forward(state.verified);
        const Token tok = sample(dist, state.rng_verify.next_uniform());
        state.verified.push_back(tok);

        IterationRecord rec;
        if (auto* clock = timeline.clock()) {
            rec.target_ms = clock->duration_ms(TargetPassEvent{1});
            clock->advance(TargetPassEvent{1});
        } else {
            rec.target_ms = elapsed_ms(t0);
        }
        rec.tokens_processed = 1;
        result.iterations.push_back(rec);
        if (result.iterations.size() == 1) {
            result.ttft_ms = timeline.now_ms();
        }
    }

    result.tokens.assign(state.verified.begin() + static_cast<std::ptrdiff_t>(prompt_len),
                         state.verified.end());
    finish_result(result, prompt_len, state.n(), timeline.now_ms());
    return result;
}

GenerationResult run_sps(const ModelSpec& target, const ModelSpec& draft,
                         std::span<const Token> prompt, const EngineConfig& config,
                         Timeline& timeline) {
    config.validate();
    if (target.vocab_size() != draft.vocab_size()) {
        throw ConfigError("target and draft models must share a vocabulary");
    }
    check_prompt(target, prompt);
    const bool retemper = config.temperature != 1.0;
    const ModelSpec target_t = retemper ? target.with_temperature(config.temperature) : ModelSpec{};
    const ModelSpec draft_t = retemper ? draft.with_temperature(config.temperature) : ModelSpec{};
    const ModelSpec& tgt = retemper ? target_t : target;
    const ModelSpec& drf = retemper ? draft_t : draft;

    timeline.reset();
    const int budget = resolve_budget(tgt, drf, config, timeline);

    GenerationResult result;
    GenerationState state;
    state.verified.assign(prompt.begin(), prompt.end());
    state.rng_draft = RandomStream(config.draft_seed);
    state.rng_verify = RandomStream(config.verify_seed);
    const std::size_t prompt_len = prompt.size();
    const DeviceProfile* profile = timeline.device_profile();

    while (state.n() - prompt_len < static_cast<std::size_t>(config.max_new_tokens)) {
        // draft phase: sample `budget` tokens from the draft model
        auto td0 = SteadyClock::now();
        std::vector<Token> draft_tokens;
        std::vector<Distribution> draft_dists;
        draft_tokens.reserve(static_cast<std::size_t>(budget));
        draft_dists.reserve(static_cast<std::size_t>(budget));
        std::vector<Token> ctx = state.verified;
        for (int k = 0; k < budget; ++k) {
            const Distribution& d = drf.forward(ctx);
            const Token t = sample(d, state.rng_draft.next_uniform());
            draft_tokens.push_back(t);
            draft_dists.push_back(d);
            ctx.push_back(t);
        }
        const double draft_ms = profile ? profile->draft_ms(budget) : elapsed_ms(td0);

        // verification phase: one scored pass over the draft plus the bonus position
        auto tt0 = SteadyClock::now();
        const std::vector<Distribution> target_dists =
            scored_with_next(tgt, state.verified, draft_tokens);
        const double target_ms =
            profile ? profile->target_pass_ms(budget + 1) : elapsed_ms(tt0);

        auto tv0 = SteadyClock::now();
        const SpsResult sv = sps_verify(draft_tokens, draft_dists, target_dists, state.rng_verify);
        state.verified.insert(state.verified.end(), draft_tokens.begin(),
                              draft_tokens.begin() + sv.accepted);
        state.verified.push_back(sv.next_token);
        const double verify_ms = profile ? profile->verify_ms() : elapsed_ms(tv0);

        if (auto* clock = timeline.clock()) {
            clock->advance(DraftEvent{budget});
            clock->advance(TargetPassEvent{budget + 1});
            clock->advance(VerifyEvent{});
        }

        IterationRecord rec;
        rec.draft_ms = draft_ms;
        rec.target_ms = target_ms;
        rec.verify_ms = verify_ms;
        rec.tokens_processed = sv.accepted + 1;
        rec.sequence_count = 1;
        rec.accepted = sv.accepted;
        result.iterations.push_back(rec);
        if (result.iterations.size() == 1) {
            result.ttft_ms = timeline.now_ms();
        }
    }

    result.tokens.assign(state.verified.begin() + static_cast<std::ptrdiff_t>(prompt_len),
                         state.verified.end());
    finish_result(result, prompt_len, state.n(), timeline.now_ms());
    return result;
}

GenerationResult run_duo(const ModelSpec& target, const ModelSpec& draft,
                         std::span<const Token> prompt, const EngineConfig& config,
                         Timeline& timeline) {
    config.validate();
    if (target.vocab_size() != draft.vocab_size()) {
        throw ConfigError("target and draft models must share a vocabulary");
    }
    check_prompt(target, prompt);
    const bool retemper = config.temperature != 1.0;
    const ModelSpec target_t = retemper ? target.with_temperature(config.temperature) : ModelSpec{};
    const ModelSpec draft_t = retemper ? draft.with_temperature(config.temperature) : ModelSpec{};
    const ModelSpec& tgt = retemper ? target_t : target;
    const ModelSpec& drf = retemper ? draft_t : draft;

    timeline.reset();
    const int budget = resolve_budget(tgt, drf, config, timeline);
    const DeviceProfile* profile = timeline.device_profile();

    GenerationResult result;
    GenerationState state;
    state.verified.assign(prompt.begin(), prompt.end());
    state.rng_draft = RandomStream(config.draft_seed);
    state.rng_verify = RandomStream(config.verify_seed);
    const std::size_t prompt_len = prompt.size();

    const bool threaded = config.duo_execution == DuoExecution::threaded;

    DuoChannel channel;
    std::thread worker;
    if (threaded) {
        worker = std::thread([&] {
            try {
                std::vector<Token> z;
                int iter = 0;
                while (channel.wait_request(z)) {
                    if (config.hooks.before_draft) {
                        config.hooks.before_draft(iter);
                    }
                    channel.post_reply(
                        draft_step(drf, z, budget, config.max_sequences, state.rng_draft, profile));
                    ++iter;
                }
            } catch (...) {
                channel.post_error(std::current_exception());
            }
        });
    }

    int iter = 0;
    while (state.n() - prompt_len < static_cast<std::size_t>(config.max_new_tokens)) {
        // both workers start from the identical prefix (verified + tail)
        std::vector<Token> z = state.verified;
        if (state.unverified) {
            z.insert(z.end(), state.unverified->tokens.begin(), state.unverified->tokens.end());
        }

        DraftStep dstep;
        TargetStep tstep;
        if (threaded) {
            channel.post_request(std::move(z));
            if (config.hooks.before_target) {
                config.hooks.before_target(iter);
            }
            tstep = target_step(tgt, state, profile);
            dstep = channel.wait_reply();  // rendezvous
        } else {
            if (config.hooks.before_draft) {
                config.hooks.before_draft(iter);
            }
            dstep = draft_step(drf, z, budget, config.max_sequences, state.rng_draft, profile);
            if (config.hooks.before_target) {
                config.hooks.before_target(iter);
            }
            tstep = target_step(tgt, state, profile);
        }

        auto tv0 = SteadyClock::now();
        IterationRecord rec;
        rec.draft_ms = dstep.ms;
        rec.target_ms = tstep.ms;
        rec.sequence_count = dstep.bundle.sequence_count();
        const int draft_forwards = dstep.bundle.forwards_used;
        const int tail_width = state.unverified ? static_cast<int>(state.unverified->size()) : 0;
        const ApplyResult applied = apply_verification(state, std::move(dstep.bundle), tstep.dists);
        rec.tokens_processed = applied.committed;
        rec.accepted = applied.accepted;

        if (auto* clock = timeline.clock()) {
            clock->parallel_advance(DraftEvent{draft_forwards},
                                    TargetPassEvent{tail_width + 1});
            clock->advance(CommEvent{});
            clock->advance(VerifyEvent{});
            rec.comm_ms = clock->duration_ms(CommEvent{});
            rec.verify_ms = clock->duration_ms(VerifyEvent{});
        } else {
            rec.verify_ms = elapsed_ms(tv0);
        }

        result.iterations.push_back(rec);
        if (result.iterations.size() == 1) {
            result.ttft_ms = timeline.now_ms();
        }
        ++iter;
    }

    if (threaded) {
        channel.post_stop();
        worker.join();
        if (channel.worker_error) {
            std::rethrow_exception(channel.worker_error);
        }
    }

    result.tokens.assign(state.verified.begin() + static_cast<std::ptrdiff_t>(prompt_len),
                         state.verified.end());
    finish_result(result, prompt_len, state.n(), timeline.now_ms());
    return result;
}

GenerationResult run_generation(const ModelSpec& target, const ModelSpec* draft,
                                std::span<const Token> prompt, const EngineConfig& config,
                                Timeline& timeline) {
    switch (config.mode) {
        case Mode::vanilla:
            return run_vanilla(target, prompt, config, timeline);
        case Mode::sps:
            if (!draft) {
                throw ConfigError("sps mode requires a draft model");
            }
            return run_sps(target, *draft, prompt, config, timeline);
        case Mode::duo:
            if (!draft) {
                throw ConfigError("duo mode requires a draft model");
            }
            return run_duo(target, *draft, prompt, config, timeline);
    }
    throw ConfigError("unknown mode");
}

double calibrate(const ModelSpec& target, const ModelSpec& draft, int probe_len, int trials,
                 Timeline& timeline) {
    if (trials < 10) {
        throw ConfigError("calibrate requires trials >= 10");
    }
    if (probe_len < 1) {
        throw ConfigError("calibrate requires probe_len >= 1");
    }
    constexpr int kWarmup = 5;
    std::vector<double> draft_samples;
    std::vector<double> target_samples;
    draft_samples.reserve(static_cast<std::size_t>(trials));
    target_samples.reserve(static_cast<std::size_t>(trials));

    const std::vector<Token> probe_ctx(static_cast<std::size_t>(probe_len), Token{0});
    const std::vector<Token> candidates(static_cast<std::size_t>(probe_len), Token{0});

    for (int i = 0; i < kWarmup + trials; ++i) {
        double d_ms;
        double t_ms;
        if (const DeviceProfile* profile = timeline.device_profile()) {
            d_ms = profile->draft_ms(1);
            t_ms = profile->target_pass_ms(probe_len);
        } else {
            auto t0 = SteadyClock::now();
            (void)draft.forward(probe_ctx);
            d_ms = elapsed_ms(t0);
            auto t1 = SteadyClock::now();
            (void)target.forward_scored(probe_ctx, candidates);
            t_ms = elapsed_ms(t1);
        }
        if (i >= kWarmup) {
            draft_samples.push_back(d_ms);
            target_samples.push_back(t_ms);
        }
    }

    const double draft_median = median(std::move(draft_samples));
    const double target_median = median(std::move(target_samples));
    constexpr double kResolutionMs = 1e-6;
    if (draft_median < kResolutionMs) {
        throw DegenerateTiming("draft forward time is below clock resolution");
    }
    return target_median / draft_median;
}

int choose_budget(double cost_coefficient) {
    return static_cast<int>(std::max<long>(2, std::lround(cost_coefficient)));
}

}  // namespace duodec
