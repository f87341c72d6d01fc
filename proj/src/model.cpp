#include "duodec/model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace duodec {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

double parse_double(std::string_view tok, std::string_view origin, int line_no) {
    try {
        return std::stod(std::string(tok));
    } catch (const std::exception&) {
        throw ParseError(std::string(origin) + ":" + std::to_string(line_no) +
                         ": expected a number, got '" + std::string(tok) + "'");
    }
}

long parse_int(std::string_view tok, std::string_view origin, int line_no) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw ParseError(std::string(origin) + ":" + std::to_string(line_no) +
                         ": expected an integer, got '" + std::string(tok) + "'");
    }
    return v;
}

std::vector<double> temper(const std::vector<double>& raw, double temperature) {
    if (temperature == 1.0) {
        return raw;
    }
    std::vector<double> out(raw.size());
    const double inv_t = 1.0 / temperature;
    double mass = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out[i] = raw[i] > 0.0 ? std::pow(raw[i], inv_t) : 0.0;
        mass += out[i];
    }
    for (double& p : out) {
        p /= mass;
    }
    return out;
}

bool row_is_distribution(const std::vector<double>& row) {
    double mass = 0.0;
    for (double p : row) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
            return false;
        }
        mass += p;
    }
    return std::abs(mass - 1.0) <= kNormalizationTolerance;
}

}  // namespace

ModelSpec ModelSpec::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open model file: " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path.string());
}

ModelSpec ModelSpec::parse(std::string_view text, std::string_view origin) {
    ModelSpec m;
    m.vocab_size_ = -1;
    m.order_ = -1;
    bool have_default = false;

    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        line = trim(line);
        if (line.empty() || line.front() == '#') {
            continue;
        }

        const std::size_t colon = line.find(':');
        auto fail = [&](const std::string& msg) -> ParseError {
            return ParseError(std::string(origin) + ":" + std::to_string(line_no) + ": " + msg);
        };

        if (colon == std::string_view::npos) {
            auto parts = split_ws(line);
            if (parts.size() != 2) {
                throw fail("expected 'key value'");
            }
            if (parts[0] == "vocab") {
                m.vocab_size_ = static_cast<int>(parse_int(parts[1], origin, line_no));
            } else if (parts[0] == "order") {
                m.order_ = static_cast<int>(parse_int(parts[1], origin, line_no));
            } else if (parts[0] == "temperature") {
                m.temperature_ = parse_double(parts[1], origin, line_no);
            } else {
                throw fail("unknown key '" + std::string(parts[0]) + "'");
            }
            continue;
        }

        // context or default row
        if (m.vocab_size_ < 0 || m.order_ < 0) {
            throw fail("vocab and order must precede rows");
        }
        std::string_view head = trim(line.substr(0, colon));
        std::string_view body = trim(line.substr(colon + 1));

        std::vector<double> row;
        for (auto tok : split_ws(body)) {
            row.push_back(parse_double(tok, origin, line_no));
        }

        if (head == "default") {
            if (have_default) {
                throw fail("duplicate default row");
            }
            m.raw_default_ = std::move(row);
            have_default = true;
            continue;
        }

        auto head_parts = split_ws(head);
        if (head_parts.size() != 2 || head_parts[0] != "ctx") {
            throw fail("expected 'ctx <t1,...,tk> : <probs>' or 'default : <probs>'");
        }
        std::vector<Token> ctx;
        std::string_view ids = head_parts[1];
        while (!ids.empty()) {
            const std::size_t comma = ids.find(',');
            std::string_view one = ids.substr(0, comma);
            ctx.push_back(static_cast<Token>(parse_int(trim(one), origin, line_no)));
            ids = comma == std::string_view::npos ? std::string_view{} : ids.substr(comma + 1);
        }
        if (m.raw_rows_.count(ctx)) {
            throw fail("duplicate ctx row");
        }
        m.raw_rows_.emplace(std::move(ctx), std::move(row));
    }

    if (m.vocab_size_ < 2) {
        throw InvalidModel(std::string(origin) + ": vocab must be >= 2");
    }
    if (m.order_ < 0) {
        throw InvalidModel(std::string(origin) + ": order must be declared and >= 0");
    }
    if (!have_default) {
        throw InvalidModel(std::string(origin) + ": missing default row");
    }
    m.finalize();
    return m;
}

ModelSpec ModelSpec::from_rows(int vocab_size, int order,
                               std::map<std::vector<Token>, std::vector<double>> context_rows,
                               std::vector<double> default_row, double temperature) {
    ModelSpec m;
    m.vocab_size_ = vocab_size;
    m.order_ = order;
    m.temperature_ = temperature;
    m.raw_rows_ = std::move(context_rows);
    m.raw_default_ = std::move(default_row);
    if (m.vocab_size_ < 2) {
        throw InvalidModel("vocab must be >= 2");
    }
    if (m.order_ < 0) {
        throw InvalidModel("order must be >= 0");
    }
    m.finalize();
    return m;
}

void ModelSpec::finalize() {
    if (temperature_ <= 0.0 || !std::isfinite(temperature_)) {
        throw InvalidModel("temperature must be positive");
    }
    auto check_row = [&](const std::vector<double>& row, const std::string& what) {
        if (static_cast<int>(row.size()) != vocab_size_) {
            throw InvalidModel(what + ": expected " + std::to_string(vocab_size_) +
                               " probabilities, got " + std::to_string(row.size()));
        }
        if (!row_is_distribution(row)) {
            throw InvalidModel(what + ": probabilities must be >= 0 and sum to 1");
        }
    };

    check_row(raw_default_, "default row");
    rows_.clear();
    row_index_.clear();
    rows_.push_back(Distribution::unchecked(temper(raw_default_, temperature_)));

    for (const auto& [ctx, row] : raw_rows_) {
        if (static_cast<int>(ctx.size()) > order_ || ctx.empty()) {
            throw InvalidModel("ctx row length must be in [1, order]");
        }
        for (Token t : ctx) {
            if (t < 0 || t >= vocab_size_) {
                throw InvalidModel("ctx token out of vocabulary");
            }
        }
        check_row(row, "ctx row");
        rows_.push_back(Distribution::unchecked(temper(row, temperature_)));
        row_index_.emplace(ctx, rows_.size() - 1);
    }

    // Precompute full-order lookups when the context space is small. This is
    // the hot path of every Monte Carlo harness.
    dense_built_ = false;
    dense_.clear();
    if (order_ > 0) {
        double cells = 1.0;
        for (int i = 0; i < order_; ++i) {
            cells *= vocab_size_;
        }
        if (cells <= 65536.0) {
            const std::size_t n = static_cast<std::size_t>(cells);
            dense_.resize(n);
            std::vector<Token> ctx(order_);
            for (std::size_t code = 0; code < n; ++code) {
                std::size_t c = code;
                for (int i = order_ - 1; i >= 0; --i) {
                    ctx[static_cast<std::size_t>(i)] = static_cast<Token>(c % vocab_size_);
                    c /= vocab_size_;
                }
                // longest suffix wins, default last
                std::size_t row = 0;
                for (int k = order_; k >= 1; --k) {
                    std::vector<Token> key(ctx.end() - k, ctx.end());
                    auto it = row_index_.find(key);
                    if (it != row_index_.end()) {
                        row = it->second;
                        break;
                    }
                }
                dense_[code] = row;
            }
            dense_built_ = true;
        }
    }
}

ModelSpec ModelSpec::with_temperature(double t) const {
    ModelSpec m;
    m.vocab_size_ = vocab_size_;
    m.order_ = order_;
    m.temperature_ = t;
    m.raw_rows_ = raw_rows_;
    m.raw_default_ = raw_default_;
    m.finalize();
    return m;
}

const Distribution& ModelSpec::forward(std::span<const Token> context) const {
    if (order_ == 0 || context.empty()) {
        return rows_[0];
    }
    if (dense_built_ && context.size() >= static_cast<std::size_t>(order_)) {
        std::size_t code = 0;
        for (std::size_t i = context.size() - static_cast<std::size_t>(order_);
             i < context.size(); ++i) {
            code = code * static_cast<std::size_t>(vocab_size_) +
                   static_cast<std::size_t>(context[i]);
        }
        return rows_[dense_[code]];
    }
    const int max_k = std::min<int>(order_, static_cast<int>(context.size()));
    for (int k = max_k; k >= 1; --k) {
        std::vector<Token> key(context.end() - k, context.end());
        auto it = row_index_.find(key);
        if (it != row_index_.end()) {
            return rows_[it->second];
        }
    }
    return rows_[0];
}

std::vector<Distribution> ModelSpec::forward_scored(std::span<const Token> context,
                                                    std::span<const Token> candidates) const {
    std::vector<Distribution> out;
    out.reserve(candidates.size());
    std::vector<Token> ctx(context.begin(), context.end());
    for (Token cand : candidates) {
        out.push_back(forward(ctx));
        ctx.push_back(cand);
    }
    return out;
}

}  // namespace duodec
