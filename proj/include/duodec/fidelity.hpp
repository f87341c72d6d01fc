#pragma once

#include <span>

#include "duodec/engine.hpp"

namespace duodec {

// Exact marginal law of each of the first `positions` generated tokens under
// the target model's autoregressive process, by exhaustive path enumeration.
// Intended for small vocabularies (cost is vocab^positions paths).
std::vector<Distribution> exact_position_laws(const ModelSpec& target,
                                              std::span<const Token> prompt, int positions);

struct FidelityReport {
    int samples = 0;
    std::vector<double> tv_per_position;
    double max_tv = 0.0;
    double threshold = 0.0;
    bool pass = false;
};

// Runs `samples` independent generations (seeds derived per sample from the
// config's seeds), histograms the first `positions` tokens, and reports the
// total-variation distance to the target's exact per-position law.
// Generations run on a simulated timeline; duo uses the sequential execution
// path, which emits the same tokens as the threaded one.
FidelityReport run_fidelity(Mode mode, const ModelSpec& target, const ModelSpec* draft,
                            std::span<const Token> prompt, const EngineConfig& config,
                            int samples, int positions, double threshold = 0.01);

}  // namespace duodec
