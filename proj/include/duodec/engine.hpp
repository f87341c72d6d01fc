#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>

#include "duodec/drafting.hpp"
#include "duodec/model.hpp"
#include "duodec/simclock.hpp"
#include "duodec/verify.hpp"

namespace duodec {

enum class Mode {
    vanilla,  // one target forward per token
    sps,      // sequential draft-then-verify speculative decoding
    duo,      // parallel draft/target workers with deferred verification
};

enum class BudgetPolicy { fixed, calibrated };

// run_duo execution strategy. Both paths run the identical protocol and emit
// bit-identical tokens; `sequential` exists for sampling harnesses that would
// otherwise pay two thread spawns per generation.
enum class DuoExecution { threaded, sequential };

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DegenerateTiming : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Test instrumentation: called at the top of each worker iteration. Used by
// the determinism tests to inject scheduling jitter.
struct WorkerHooks {
    std::function<void(int)> before_draft;
    std::function<void(int)> before_target;
};

struct EngineConfig {
    Mode mode = Mode::duo;
    int budget = 24;           // drafted tokens per iteration
    int max_sequences = 8;     // cap on concurrent draft sequences
    int max_new_tokens = 128;  // stop once this many tokens are verified
    // replaces both models' temperature when != 1.0
    double temperature = 1.0;
    std::uint64_t draft_seed = 1;
    std::uint64_t verify_seed = 2;
    BudgetPolicy budget_policy = BudgetPolicy::fixed;
    int budget_hard_cap = 256;
    int calib_probe_len = 8;
    int calib_trials = 12;
    DuoExecution duo_execution = DuoExecution::threaded;
    WorkerHooks hooks;

    void validate() const;  // throws ConfigError
};

struct IterationRecord {
    double draft_ms = 0.0;
    double target_ms = 0.0;
    double verify_ms = 0.0;
    double comm_ms = 0.0;
    int tokens_processed = 0;  // tokens committed to the verified prefix
    int sequence_count = 0;    // draft sequences this iteration (0 in vanilla)
    int accepted = 0;          // drafted tokens among the committed ones
};

struct GenerationResult {
    std::vector<Token> tokens;  // generated tokens, prompt excluded
    std::vector<IterationRecord> iterations;
    double ttft_ms = 0.0;   // start to the first verified token's commit
    double total_ms = 0.0;
    double tps = 0.0;       // tokens per second over total_ms
};

// Time source for a run: a deterministic virtual clock over a DeviceProfile,
// or real wall time for runs on genuine hardware.
class Timeline {
  public:
    static Timeline simulated(const DeviceProfile& profile);
    static Timeline wall();

    bool is_simulated() const { return clock_.has_value(); }
    const DeviceProfile* device_profile() const {
        return clock_ ? &clock_->profile() : nullptr;
    }
    VirtualClock* clock() { return clock_ ? &*clock_ : nullptr; }

    double now_ms() const;
    void reset();

  private:
    Timeline() = default;
    std::optional<VirtualClock> clock_;
    std::chrono::steady_clock::time_point epoch_ = std::chrono::steady_clock::now();
};

GenerationResult run_vanilla(const ModelSpec& target, std::span<const Token> prompt,
                             const EngineConfig& config, Timeline& timeline);

GenerationResult run_sps(const ModelSpec& target, const ModelSpec& draft,
                         std::span<const Token> prompt, const EngineConfig& config,
                         Timeline& timeline);

GenerationResult run_duo(const ModelSpec& target, const ModelSpec& draft,
                         std::span<const Token> prompt, const EngineConfig& config,
                         Timeline& timeline);

// Dispatch on config.mode; draft may be null for vanilla.
GenerationResult run_generation(const ModelSpec& target, const ModelSpec* draft,
                                std::span<const Token> prompt, const EngineConfig& config,
                                Timeline& timeline);

// Cost coefficient: median scored-pass time at probe_len over the median
// single-token draft forward, after 5 discarded warm-up trials per side.
// Exact under a simulated timeline. Throws DegenerateTiming when the draft
// median is below the clock resolution and ConfigError when trials < 10.
double calibrate(const ModelSpec& target, const ModelSpec& draft, int probe_len, int trials,
                 Timeline& timeline);

// Budget from the cost coefficient: max(2, round(c)).
int choose_budget(double cost_coefficient);

}  // namespace duodec
