#include "duodec/fidelity.hpp"

#include <algorithm>
#include <cassert>

namespace duodec {

std::vector<Distribution> exact_position_laws(const ModelSpec& target,
                                              std::span<const Token> prompt, int positions) {
    assert(positions >= 1);
    const auto vocab = static_cast<std::size_t>(target.vocab_size());
    std::vector<std::vector<double>> laws(static_cast<std::size_t>(positions),
                                          std::vector<double>(vocab, 0.0));

    // depth-first walk over all generation paths, accumulating path weights
    std::vector<Token> ctx(prompt.begin(), prompt.end());
    auto walk = [&](auto&& self, int pos, double weight) -> void {
        const Distribution& dist = target.forward(ctx);
        for (std::size_t t = 0; t < vocab; ++t) {
            const double p = dist[t];
            if (p <= 0.0) {
                continue;
            }
            const double w = weight * p;
            laws[static_cast<std::size_t>(pos)][t] += w;
            if (pos + 1 < positions) {
                ctx.push_back(static_cast<Token>(t));
                self(self, pos + 1, w);
                ctx.pop_back();
            }
        }
    };
    walk(walk, 0, 1.0);

    std::vector<Distribution> out;
    out.reserve(laws.size());
    for (auto& law : laws) {
        out.push_back(normalize(law));  // exact up to rounding
    }
    return out;
}

FidelityReport run_fidelity(Mode mode, const ModelSpec& target, const ModelSpec* draft,
                            std::span<const Token> prompt, const EngineConfig& config,
                            int samples, int positions, double threshold) {
    assert(samples > 0 && positions >= 1);
    EngineConfig cfg = config;
    cfg.mode = mode;
    cfg.max_new_tokens = positions;
    cfg.duo_execution = DuoExecution::sequential;

    const ModelSpec effective_target =
        cfg.temperature != 1.0 ? target.with_temperature(cfg.temperature) : target;
    const std::vector<Distribution> exact = exact_position_laws(effective_target, prompt, positions);

    const auto vocab = static_cast<std::size_t>(target.vocab_size());
    std::vector<std::vector<double>> counts(static_cast<std::size_t>(positions),
                                            std::vector<double>(vocab, 0.0));

    Timeline timeline = Timeline::simulated(DeviceProfile::balanced24());
    for (int i = 0; i < samples; ++i) {
        EngineConfig run_cfg = cfg;
        run_cfg.draft_seed = derive_seed(cfg.draft_seed, static_cast<std::uint64_t>(2 * i));
        run_cfg.verify_seed = derive_seed(cfg.verify_seed, static_cast<std::uint64_t>(2 * i + 1));
        const GenerationResult res = run_generation(target, draft, prompt, run_cfg, timeline);
        assert(res.tokens.size() >= static_cast<std::size_t>(positions));
        for (int k = 0; k < positions; ++k) {
            counts[static_cast<std::size_t>(k)]
                  [static_cast<std::size_t>(res.tokens[static_cast<std::size_t>(k)])] += 1.0;
        }
    }

    FidelityReport report;
    report.samples = samples;
    report.threshold = threshold;
    const double inv_n = 1.0 / static_cast<double>(samples);
    for (int k = 0; k < positions; ++k) {
        auto& row = counts[static_cast<std::size_t>(k)];
        for (double& c : row) {
            c *= inv_n;
        }
        const double tv = tv_distance(std::span<const double>(row),
                                      exact[static_cast<std::size_t>(k)].probs());
        report.tv_per_position.push_back(tv);
        report.max_tv = std::max(report.max_tv, tv);
    }
    report.pass = report.max_tv <= threshold;
    return report;
}

}  // namespace duodec
