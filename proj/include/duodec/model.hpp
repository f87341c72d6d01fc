#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "duodec/distribution.hpp"

namespace duodec {

struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// malformed model file
struct ParseError : ModelError {
    using ModelError::ModelError;
};
// rows fail normalization, missing default row, vocabulary mismatch
struct InvalidModel : ModelError {
    using ModelError::ModelError;
};

// Backoff Markov table standing in for an autoregressive language model.
// Lookup uses the longest matching context suffix, backing off to shorter
// suffixes and finally to the mandatory default row. Temperature T is applied
// as probs^(1/T) followed by renormalization, once at construction.
//
// File format (UTF-8, '#' comments ignored):
//   vocab <V>
//   order <m>
//   temperature <T>          # optional, default 1.0
//   ctx <t1,...,tk> : <V space-separated probs>   # k <= m
//   default : <V space-separated probs>
class ModelSpec {
  public:
    ModelSpec() = default;

    static ModelSpec load(const std::filesystem::path& path);
    static ModelSpec parse(std::string_view text, std::string_view origin = "<string>");

    // Programmatic construction (tests, generators). Rows hold raw
    // (pre-temperature) probabilities keyed by context tuple.
    static ModelSpec from_rows(int vocab_size, int order,
                               std::map<std::vector<Token>, std::vector<double>> context_rows,
                               std::vector<double> default_row, double temperature = 1.0);

    int vocab_size() const { return vocab_size_; }
    int order() const { return order_; }
    double temperature() const { return temperature_; }

    // Same table re-tempered from the raw rows.
    ModelSpec with_temperature(double t) const;

    // Next-token distribution for the longest matching context suffix.
    // The returned reference points into the model's row storage.
    const Distribution& forward(std::span<const Token> context) const;

    // Next-token distribution at the position before each candidate:
    // result[t] == forward(context ++ candidates[0..t)). Semantically a loop
    // of forward calls; the latency simulator bills it as a single pass.
    std::vector<Distribution> forward_scored(std::span<const Token> context,
                                             std::span<const Token> candidates) const;

  private:
    void finalize();  // temper rows, build the dense lookup

    int vocab_size_ = 0;
    int order_ = 0;
    double temperature_ = 1.0;
    std::map<std::vector<Token>, std::vector<double>> raw_rows_;
    std::vector<double> raw_default_;

    std::vector<Distribution> rows_;  // tempered, index 0 = default row
    std::map<std::vector<Token>, std::size_t> row_index_;
    // full-order context -> row, for vocab_size^order small enough
    std::vector<std::size_t> dense_;
    bool dense_built_ = false;
};

}  // namespace duodec
