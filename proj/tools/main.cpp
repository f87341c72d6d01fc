// duodec CLI: generation runs, mode benchmarks, budget calibration, fidelity
// testing and per-iteration profiling, all emitting UTF-8 JSON.
//
// Exit codes: 0 success, 2 usage/config error, 3 model/profile load failure,
// 4 fidelity-test failure.

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "duodec/engine.hpp"
#include "duodec/fidelity.hpp"
#include "duodec/kernels.hpp"

using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitLoad = 3;
constexpr int kExitFidelity = 4;

struct Manifest {
    std::string mode = "duo";
    std::string target_path;
    std::string draft_path;
    std::string profile_path;  // empty = built-in balanced24, "wall" = wall clock
    std::string prompt_inline;
    std::string prompt_file;
    std::string modes;  // comma list for bench/fidelity
    std::string budget_policy = "fixed";
    std::string kernels = "auto";
    std::string out_path;
    int gamma = 24;
    int smax = 8;
    int max_tokens = 128;
    int samples = 200000;
    int positions = 4;
    int probe_len = 8;
    int trials = 12;
    double temperature = 1.0;
    std::uint64_t seed_draft = 1;
    std::uint64_t seed_verify = 2;
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

duodec::Mode parse_mode(const std::string& s) {
    if (s == "vanilla") return duodec::Mode::vanilla;
    if (s == "sps") return duodec::Mode::sps;
    if (s == "duo") return duodec::Mode::duo;
    throw UsageError("unknown mode '" + s + "' (expected vanilla|sps|duo)");
}

const char* mode_name(duodec::Mode m) {
    switch (m) {
        case duodec::Mode::vanilla: return "vanilla";
        case duodec::Mode::sps: return "sps";
        case duodec::Mode::duo: return "duo";
    }
    return "?";
}

std::vector<duodec::Token> parse_token_list(const std::string& text) {
    std::vector<duodec::Token> out;
    std::string cleaned = text;
    for (char& c : cleaned) {
        if (c == ',') c = ' ';
    }
    std::istringstream in(cleaned);
    std::string tok;
    while (in >> tok) {
        if (tok[0] == '#') {
            std::string rest;
            std::getline(in, rest);
            continue;
        }
        try {
            out.push_back(static_cast<duodec::Token>(std::stol(tok)));
        } catch (const std::exception&) {
            throw UsageError("bad prompt token '" + tok + "'");
        }
    }
    return out;
}

std::vector<duodec::Token> load_prompt(const Manifest& m) {
    if (!m.prompt_file.empty()) {
        std::ifstream in(m.prompt_file);
        if (!in) {
            throw UsageError("cannot open prompt file: " + m.prompt_file);
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse_token_list(buf.str());
    }
    return parse_token_list(m.prompt_inline);
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::istringstream in(csv);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

duodec::EngineConfig engine_config(const Manifest& m) {
    duodec::EngineConfig cfg;
    cfg.mode = parse_mode(m.mode);
    cfg.budget = m.gamma;
    cfg.max_sequences = m.smax;
    cfg.max_new_tokens = m.max_tokens;
    cfg.temperature = m.temperature;
    cfg.draft_seed = m.seed_draft;
    cfg.verify_seed = m.seed_verify;
    cfg.calib_probe_len = m.probe_len;
    cfg.calib_trials = m.trials;
    if (m.budget_policy == "fixed") {
        cfg.budget_policy = duodec::BudgetPolicy::fixed;
    } else if (m.budget_policy == "calibrated") {
        cfg.budget_policy = duodec::BudgetPolicy::calibrated;
    } else {
        throw UsageError("unknown budget policy '" + m.budget_policy + "'");
    }
    return cfg;
}

duodec::Timeline make_timeline(const Manifest& m) {
    if (m.profile_path == "wall") {
        return duodec::Timeline::wall();
    }
    if (m.profile_path.empty()) {
        return duodec::Timeline::simulated(duodec::DeviceProfile::balanced24());
    }
    return duodec::Timeline::simulated(duodec::DeviceProfile::load(m.profile_path));
}

struct LoadedModels {
    duodec::ModelSpec target;
    duodec::ModelSpec draft;
    bool has_draft = false;
};

LoadedModels load_models(const Manifest& m, bool need_draft) {
    if (m.target_path.empty()) {
        throw UsageError("--target is required");
    }
    if (need_draft && m.draft_path.empty()) {
        throw UsageError("--draft is required for this mode");
    }
    LoadedModels models;
    models.target = duodec::ModelSpec::load(m.target_path);
    if (!m.draft_path.empty()) {
        models.draft = duodec::ModelSpec::load(m.draft_path);
        models.has_draft = true;
    }
    return models;
}

void apply_kernel_choice(const Manifest& m) {
    using duodec::kernels::Backend;
    if (m.kernels == "auto") {
        return;
    }
    Backend b;
    if (m.kernels == "scalar") {
        b = Backend::scalar;
    } else if (m.kernels == "avx2") {
        b = Backend::avx2;
    } else {
        throw UsageError("unknown kernel backend '" + m.kernels + "'");
    }
    if (!duodec::kernels::select_backend(b)) {
        throw UsageError("kernel backend '" + m.kernels + "' unsupported on this CPU");
    }
}

void write_output(const Manifest& m, const std::string& text) {
    if (m.out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(m.out_path);
    if (!out) {
        throw UsageError("cannot open output file: " + m.out_path);
    }
    out << text;
}

json iteration_json(const duodec::IterationRecord& it) {
    return json{{"draft_ms", it.draft_ms},       {"target_ms", it.target_ms},
                {"verify_ms", it.verify_ms},     {"comm_ms", it.comm_ms},
                {"tokens_processed", it.tokens_processed},
                {"s", it.sequence_count},        {"accepted", it.accepted}};
}

json result_json(duodec::Mode mode, const duodec::GenerationResult& r) {
    json iters = json::array();
    for (const auto& it : r.iterations) {
        iters.push_back(iteration_json(it));
    }
    return json{{"mode", mode_name(mode)}, {"tokens", r.tokens},   {"tps", r.tps},
                {"ttft_ms", r.ttft_ms},    {"total_ms", r.total_ms}, {"iterations", iters}};
}

int cmd_generate(const Manifest& m) {
    const duodec::EngineConfig cfg = engine_config(m);
    const bool need_draft = cfg.mode != duodec::Mode::vanilla;
    const LoadedModels models = load_models(m, need_draft);
    const std::vector<duodec::Token> prompt = load_prompt(m);
    duodec::Timeline timeline = make_timeline(m);
    const duodec::GenerationResult r = duodec::run_generation(
        models.target, models.has_draft ? &models.draft : nullptr, prompt, cfg, timeline);
    write_output(m, result_json(cfg.mode, r).dump(2) + "\n");
    return kExitOk;
}

int cmd_bench(const Manifest& m) {
    std::vector<std::string> mode_names =
        m.modes.empty() ? std::vector<std::string>{"vanilla", "sps", "duo"} : split_list(m.modes);
    std::vector<duodec::Mode> modes;
    bool has_vanilla = false;
    bool needs_draft = false;
    for (const auto& name : mode_names) {
        const duodec::Mode mode = parse_mode(name);
        modes.push_back(mode);
        has_vanilla |= mode == duodec::Mode::vanilla;
        needs_draft |= mode != duodec::Mode::vanilla;
    }
    const LoadedModels models = load_models(m, needs_draft);
    const std::vector<duodec::Token> prompt = load_prompt(m);

    double vanilla_tps = 0.0;
    double vanilla_ttft = 0.0;
    std::ostringstream out;
    std::vector<std::pair<duodec::Mode, duodec::GenerationResult>> results;
    for (duodec::Mode mode : modes) {
        duodec::EngineConfig cfg = engine_config(m);
        cfg.mode = mode;
        duodec::Timeline timeline = make_timeline(m);
        duodec::GenerationResult r = duodec::run_generation(
            models.target, models.has_draft ? &models.draft : nullptr, prompt, cfg, timeline);
        if (mode == duodec::Mode::vanilla) {
            vanilla_tps = r.tps;
            vanilla_ttft = r.ttft_ms;
        }
        results.emplace_back(mode, std::move(r));
    }
    for (const auto& [mode, r] : results) {
        json line{{"mode", mode_name(mode)},
                  {"tps", r.tps},
                  {"ttft_ms", r.ttft_ms},
                  {"total_ms", r.total_ms},
                  {"tokens", r.tokens.size()}};
        // speedup relative to vanilla on the identical prompt and timeline
        if (has_vanilla && vanilla_tps > 0.0) {
            line["phi"] = r.tps / vanilla_tps;
            line["rel_ttft"] = vanilla_ttft > 0.0 ? r.ttft_ms / vanilla_ttft : 0.0;
        }
        out << line.dump() << "\n";
    }
    write_output(m, out.str());
    return kExitOk;
}

int cmd_calibrate(const Manifest& m) {
    if (m.trials < 10) {
        throw UsageError("--trials must be >= 10");
    }
    const LoadedModels models = load_models(m, true);
    duodec::Timeline timeline = make_timeline(m);
    const double c =
        duodec::calibrate(models.target, models.draft, m.probe_len, m.trials, timeline);
    const int budget = duodec::choose_budget(c);
    write_output(m, json{{"cost_coefficient", c}, {"budget", budget}}.dump(2) + "\n");
    return kExitOk;
}

int cmd_fidelity(const Manifest& m) {
    if (m.samples < 10000) {
        throw UsageError("--samples must be >= 10000");
    }
    if (m.positions < 1) {
        throw UsageError("--positions must be >= 1");
    }
    std::vector<std::string> mode_names =
        m.modes.empty() ? std::vector<std::string>{m.mode} : split_list(m.modes);
    bool needs_draft = false;
    std::vector<duodec::Mode> modes;
    for (const auto& name : mode_names) {
        modes.push_back(parse_mode(name));
        needs_draft |= modes.back() != duodec::Mode::vanilla;
    }
    const LoadedModels models = load_models(m, needs_draft);
    const std::vector<duodec::Token> prompt = load_prompt(m);

    bool all_pass = true;
    std::ostringstream out;
    for (duodec::Mode mode : modes) {
        duodec::EngineConfig cfg = engine_config(m);
        cfg.mode = mode;
        const duodec::FidelityReport rep = duodec::run_fidelity(
            mode, models.target, models.has_draft ? &models.draft : nullptr, prompt, cfg,
            m.samples, m.positions);
        all_pass &= rep.pass;
        out << json{{"mode", mode_name(mode)},
                    {"samples", rep.samples},
                    {"positions", rep.tv_per_position.size()},
                    {"tv", rep.tv_per_position},
                    {"max_tv", rep.max_tv},
                    {"threshold", rep.threshold},
                    {"pass", rep.pass}}
                   .dump()
            << "\n";
    }
    write_output(m, out.str());
    return all_pass ? kExitOk : kExitFidelity;
}

int cmd_profile(const Manifest& m) {
    const duodec::EngineConfig cfg = engine_config(m);
    const bool need_draft = cfg.mode != duodec::Mode::vanilla;
    const LoadedModels models = load_models(m, need_draft);
    const std::vector<duodec::Token> prompt = load_prompt(m);
    duodec::Timeline timeline = make_timeline(m);
    const duodec::GenerationResult r = duodec::run_generation(
        models.target, models.has_draft ? &models.draft : nullptr, prompt, cfg, timeline);

    std::ostringstream out;
    std::map<int, int> histogram;
    int i = 0;
    for (const auto& it : r.iterations) {
        json line = iteration_json(it);
        line["iteration"] = i++;
        out << line.dump() << "\n";
        if (it.sequence_count > 0) {
            ++histogram[it.sequence_count];
        }
    }
    json hist = json::object();
    for (const auto& [s, count] : histogram) {
        hist[std::to_string(s)] = count;
    }
    out << json{{"summary", true},
                {"iterations", r.iterations.size()},
                {"sequence_histogram", hist},
                {"tokens", r.tokens.size()},
                {"tps", r.tps},
                {"ttft_ms", r.ttft_ms},
                {"total_ms", r.total_ms}}
               .dump()
        << "\n";
    write_output(m, out.str());
    return kExitOk;
}

// Config files use the same line-oriented `key value` format as models and
// profiles; keys are the long option names without dashes.
std::vector<std::string> expand_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw UsageError("cannot open config file: " + path);
    }
    std::vector<std::string> args;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key) || key[0] == '#') {
            continue;
        }
        std::string value;
        std::getline(ls, value);
        const std::size_t start = value.find_first_not_of(" \t");
        value = start == std::string::npos ? std::string{} : value.substr(start);
        args.push_back("--" + key);
        if (!value.empty()) {
            args.push_back(value);
        }
    }
    return args;
}

void add_common_options(CLI::App* sub, Manifest& m, std::string& config_path) {
    sub->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    sub->add_option("--config", config_path, "config file (key value lines)");
    sub->add_option("--mode", m.mode, "vanilla|sps|duo");
    sub->add_option("--target", m.target_path, "target model file");
    sub->add_option("--draft", m.draft_path, "draft model file");
    sub->add_option("--profile", m.profile_path, "device profile file, or 'wall'");
    sub->add_option("--gamma", m.gamma, "draft budget (tokens per iteration)");
    sub->add_option("--smax", m.smax, "max draft sequences");
    sub->add_option("--max-tokens", m.max_tokens, "tokens to generate");
    sub->add_option("--temperature", m.temperature, "sampling temperature");
    sub->add_option("--seed-draft", m.seed_draft, "draft-side RNG seed");
    sub->add_option("--seed-verify", m.seed_verify, "verify-side RNG seed");
    sub->add_option("--prompt", m.prompt_inline, "prompt token ids, e.g. '0,1,2'");
    sub->add_option("--prompt-file", m.prompt_file, "prompt token file (one id per line)");
    sub->add_option("--budget-policy", m.budget_policy, "fixed|calibrated");
    sub->add_option("--kernels", m.kernels, "scalar|avx2|auto");
    sub->add_option("--out", m.out_path, "output path (default stdout)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"duodec: dual-worker speculative decoding engine"};
    app.require_subcommand(1);

    Manifest m;
    std::string config_path;

    CLI::App* generate = app.add_subcommand("generate", "run one generation, emit result JSON");
    CLI::App* bench = app.add_subcommand("bench", "compare modes on one prompt (JSON lines)");
    CLI::App* calibrate = app.add_subcommand("calibrate", "measure cost coefficient, pick budget");
    CLI::App* fidelity = app.add_subcommand("fidelity", "TV distance to the target's law");
    CLI::App* profile = app.add_subcommand("profile", "per-iteration timing breakdown");

    for (CLI::App* sub : {generate, bench, calibrate, fidelity, profile}) {
        add_common_options(sub, m, config_path);
    }
    bench->add_option("--modes", m.modes, "comma list of modes (default all)");
    fidelity->add_option("--modes", m.modes, "comma list of modes (default --mode)");
    fidelity->add_option("--samples", m.samples, "generations to sample (>= 10000)");
    fidelity->add_option("--positions", m.positions, "positions to check");
    calibrate->add_option("--probe-len", m.probe_len, "scored-pass width to probe");
    calibrate->add_option("--trials", m.trials, "timing trials (>= 10)");

    // A config file is expanded into args placed right after the subcommand,
    // so explicit flags (parsed later, TakeLast) override it.
    std::vector<std::string> raw_args(argv + 1, argv + argc);
    std::vector<std::string> args;
    try {
        std::string config_arg;
        for (std::size_t i = 0; i < raw_args.size(); ++i) {
            if (raw_args[i] == "--config" && i + 1 < raw_args.size()) {
                config_arg = raw_args[i + 1];
            } else if (raw_args[i].rfind("--config=", 0) == 0) {
                config_arg = raw_args[i].substr(9);
            }
        }
        if (!config_arg.empty() && !raw_args.empty()) {
            args.push_back(raw_args[0]);  // subcommand first
            for (auto& a : expand_config_file(config_arg)) {
                args.push_back(std::move(a));
            }
            args.insert(args.end(), raw_args.begin() + 1, raw_args.end());
        } else {
            args = raw_args;
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    std::vector<const char*> cargs;
    cargs.push_back(argv[0]);
    for (const auto& a : args) {
        cargs.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    CLI::App* active = app.get_subcommands().front();
    try {
        apply_kernel_choice(m);
        const std::string cmd = active->get_name();
        if (cmd == "generate") return cmd_generate(m);
        if (cmd == "bench") return cmd_bench(m);
        if (cmd == "calibrate") return cmd_calibrate(m);
        if (cmd == "fidelity") return cmd_fidelity(m);
        if (cmd == "profile") return cmd_profile(m);
        std::cerr << "unknown subcommand\n";
        return kExitUsage;
    } catch (const duodec::ModelError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitLoad;
    } catch (const duodec::ProfileError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitLoad;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const duodec::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const duodec::DegenerateTiming& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}
