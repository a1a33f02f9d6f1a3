#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "crowdbias/error.hpp"
#include "crowdbias/linalg.hpp"
#include "crowdbias/random.hpp"

namespace crowdbias {

class Vocab {
public:
    Vocab() = default;
    explicit Vocab(const std::vector<std::string>& tokens) {
        for (const auto& t : tokens) add(t);
    }

    /// Returns the token's index, inserting it if new.
    std::size_t add(const std::string& token) {
        auto [it, inserted] = index_.emplace(token, tokens_.size());
        if (inserted) tokens_.push_back(token);
        return it->second;
    }

    std::optional<std::size_t> find(std::string_view token) const {
        auto it = index_.find(std::string(token));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    bool contains(std::string_view token) const { return find(token).has_value(); }
    const std::string& token(std::size_t i) const { return tokens_.at(i); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    std::size_t size() const { return tokens_.size(); }

private:
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::string> tokens_;
};

/// V x D table; row i is the vector of the vocab's token i.
struct EmbeddingTable {
    Matrix vectors;
    std::size_t dim() const { return vectors.cols(); }
    std::size_t size() const { return vectors.rows(); }
};

struct Embeddings {
    Vocab vocab;
    EmbeddingTable table;
};

namespace detail {

// Byte length of a UTF-8 whitespace sequence starting at s[i], or 0.
inline std::size_t utf8_space_len(std::string_view s, std::size_t i) {
    const auto b = [&](std::size_t k) { return i + k < s.size() ? static_cast<unsigned char>(s[i + k]) : 0u; };
    const unsigned c0 = b(0);
    if (c0 == ' ' || c0 == '\t' || c0 == '\n' || c0 == '\r' || c0 == '\v' || c0 == '\f') return 1;
    if (c0 == 0xC2 && (b(1) == 0x85 || b(1) == 0xA0)) return 2;  // NEL, NBSP
    if (c0 == 0xE1 && b(1) == 0x9A && b(2) == 0x80) return 3;    // OGHAM SPACE MARK
    if (c0 == 0xE2 && b(1) == 0x80 && (b(2) <= 0x8A || b(2) == 0xA8 || b(2) == 0xA9 || b(2) == 0xAF)) return 3;
    if (c0 == 0xE2 && b(1) == 0x81 && b(2) == 0x9F) return 3;  // MEDIUM MATHEMATICAL SPACE
    if (c0 == 0xE3 && b(1) == 0x80 && b(2) == 0x80) return 3;  // IDEOGRAPHIC SPACE
    return 0;
}

inline bool is_ascii_punct(char c) { return static_cast<unsigned char>(c) < 0x80 && std::ispunct(static_cast<unsigned char>(c)); }

}  // namespace detail

/// Lowercases ASCII letters, splits on Unicode whitespace and trims ASCII
/// punctuation from both ends of each token. Tokens that are pure
/// punctuation vanish.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        std::size_t b = 0, e = cur.size();
        while (b < e && detail::is_ascii_punct(cur[b])) ++b;
        while (e > b && detail::is_ascii_punct(cur[e - 1])) --e;
        if (e > b) out.push_back(cur.substr(b, e - b));
        cur.clear();
    };
    for (std::size_t i = 0; i < text.size();) {
        if (const std::size_t n = detail::utf8_space_len(text, i)) {
            flush();
            i += n;
            continue;
        }
        const char ch = text[i++];
        cur.push_back(static_cast<unsigned char>(ch) < 0x80 ? static_cast<char>(std::tolower(static_cast<unsigned char>(ch))) : ch);
    }
    flush();
    return out;
}

/// Reads the whitespace-delimited "token v1 ... vD" text format. D comes
/// from the first line; every later line must match it.
inline Embeddings load_embeddings(const std::string& path, const Vocab* restrict_to = nullptr) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    Embeddings out;
    std::vector<double> values;
    std::size_t dim = 0;
    std::size_t lineno = 0;
    std::string line;
    std::vector<double> row;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const char* p = line.data();
        const char* end = p + line.size();
        while (p < end && (*p == ' ' || *p == '\t')) ++p;
        const char* tok_begin = p;
        while (p < end && *p != ' ' && *p != '\t') ++p;
        std::string token(tok_begin, p);
        row.clear();
        while (true) {
            while (p < end && (*p == ' ' || *p == '\t')) ++p;
            if (p >= end) break;
            double v = 0.0;
            auto [next, ec] = std::from_chars(p, end, v);
            if (ec != std::errc() || (next < end && *next != ' ' && *next != '\t'))
                throw ParseError("line " + std::to_string(lineno) + ": non-numeric field in embedding for '" + token + "'");
            row.push_back(v);
            p = next;
        }
        if (dim == 0) {
            if (row.empty()) throw ParseError("line " + std::to_string(lineno) + ": embedding has no values");
            dim = row.size();
        } else if (row.size() != dim) {
            throw ParseError("line " + std::to_string(lineno) + ": inconsistent dimension " + std::to_string(row.size()) +
                             " (expected " + std::to_string(dim) + ")");
        }
        if (restrict_to && !restrict_to->contains(token)) continue;
        if (out.vocab.contains(token)) continue;  // first occurrence wins
        out.vocab.add(token);
        values.insert(values.end(), row.begin(), row.end());
    }
    if (dim == 0) throw ParseError("empty embedding file: '" + path + "'");
    out.table.vectors = Matrix(out.vocab.size(), dim);
    out.table.vectors.data() = std::move(values);
    return out;
}

inline void write_embeddings(const Embeddings& e, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw Error("cannot write '" + path + "'");
    for (std::size_t i = 0; i < e.vocab.size(); ++i) {
        std::fputs(e.vocab.token(i).c_str(), f);
        for (double v : e.table.vectors.row(i)) std::fprintf(f, " %.17g", v);
        std::fputc('\n', f);
    }
    if (std::fclose(f) != 0) throw Error("failed writing '" + path + "'");
}

/// Random unit-norm vectors (Gaussian direction) for the given tokens.
inline Embeddings synth_embeddings(const std::vector<std::string>& tokens, std::size_t dim, std::uint64_t seed) {
    if (dim == 0) throw InvalidArgument("embedding dimension must be positive");
    Embeddings out{Vocab(tokens), {}};
    out.table.vectors = Matrix(out.vocab.size(), dim);
    Rng rng(seed);
    for (std::size_t i = 0; i < out.vocab.size(); ++i) {
        auto r = out.table.vectors.row(i);
        double norm = 0.0;
        do {
            norm = 0.0;
            for (double& x : r) {
                // Box-Muller; only the cosine branch is used
                const double u1 = 1.0 - rng.uniform();
                const double u2 = rng.uniform();
                x = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
                norm += x * x;
            }
        } while (norm == 0.0);
        norm = std::sqrt(norm);
        for (double& x : r) x /= norm;
    }
    return out;
}

/// Stacks the rows of in-vocabulary tokens. OOV tokens are dropped; if
/// nothing remains, a single zero row stands in so attention stays defined.
inline Matrix embed_sequence(const std::vector<std::string>& tokens, const Vocab& vocab, const EmbeddingTable& table) {
    std::vector<std::size_t> idx;
    idx.reserve(tokens.size());
    for (const auto& t : tokens)
        if (auto i = vocab.find(t)) idx.push_back(*i);
    const std::size_t D = table.dim();
    if (idx.empty()) return Matrix(1, D, 0.0);
    Matrix m(idx.size(), D);
    for (std::size_t s = 0; s < idx.size(); ++s) {
        auto src = table.vectors.row(idx[s]);
        std::copy(src.begin(), src.end(), m.row(s).begin());
    }
    return m;
}

}  // namespace crowdbias
