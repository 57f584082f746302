#include "gstk/tokenizer.hpp"

#include <string>

#include "gstk/errors.hpp"

namespace gs {

namespace {

std::int64_t pow5(int k) {
    std::int64_t v = 1;
    for (int i = 0; i < k; ++i) v *= 5;
    return v;
}

void check_k(int k) {
    if (k < 1 || k > kMaxKmer) {
        throw ConfigError("k must be in [1, " + std::to_string(kMaxKmer) + "], got " +
                          std::to_string(k));
    }
}

}  // namespace

void TokenizerConfig::validate() const {
    check_k(k);
    if (!(mask_prob >= 0.0 && mask_prob <= 1.0)) {
        throw ConfigError("mask_prob must be in [0, 1], got " + std::to_string(mask_prob));
    }
}

std::int64_t vocab_size(int k) {
    check_k(k);
    return pow5(k) + 1;
}

TokenId mask_token_id(int k) {
    check_k(k);
    return static_cast<TokenId>(pow5(k));
}

TokenId token_id(std::span<const PLetter> kmer, int k) {
    check_k(k);
    if (static_cast<int>(kmer.size()) != k) {
        throw TokenizeError("expected a " + std::to_string(k) + "-mer, got " +
                            std::to_string(kmer.size()) + " letters");
    }
    std::int64_t id = 0;
    for (PLetter l : kmer) id = id * 5 + static_cast<std::int64_t>(l);
    return static_cast<TokenId>(id);
}

TokenIds kmer_tokenize(const PreprocessedSequence& seq, const TokenizerConfig& cfg) {
    cfg.validate();
    const int k = cfg.k;
    if (seq.length() < static_cast<std::size_t>(k)) {
        throw SequenceTooShort("sequence '" + seq.id + "' has " +
                               std::to_string(seq.length()) + " letters, need at least " +
                               std::to_string(k));
    }
    TokenIds out;
    out.k = k;
    const std::size_t n_tokens = seq.length() / static_cast<std::size_t>(k);
    out.ids.reserve(n_tokens);
    std::span<const PLetter> letters(seq.letters);
    for (std::size_t t = 0; t < n_tokens; ++t) {
        out.ids.push_back(token_id(letters.subspan(t * k, k), k));
    }
    return out;
}

Rng mask_rng(const TokenizerConfig& cfg, std::uint64_t sample_index, std::uint64_t epoch) {
    return Rng(mix_seed(cfg.seed, sample_index, epoch));
}

MaskedTokenIds random_mask(const TokenIds& tokens, const TokenizerConfig& cfg, Rng& rng) {
    cfg.validate();
    MaskedTokenIds out;
    out.k = tokens.k;
    out.mask_id = mask_token_id(tokens.k);
    out.ids = tokens.ids;
    const double p = cfg.mask_prob;
    for (std::size_t i = 0; i < out.ids.size(); ++i) {
        if (rng.uniform() < p) {
            out.ids[i] = out.mask_id;
            out.mask_positions.push_back(static_cast<std::int32_t>(i));
        }
    }
    return out;
}

PreprocessedSequence detokenize(const TokenIds& tokens) {
    check_k(tokens.k);
    const std::int64_t limit = pow5(tokens.k);
    PreprocessedSequence out;
    out.letters.reserve(tokens.size() * static_cast<std::size_t>(tokens.k));
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        const std::int64_t id = tokens.ids[t];
        if (id < 0 || id >= limit) {
            throw NotInvertible("token " + std::to_string(id) + " at position " +
                                std::to_string(t) + " is not a legal " +
                                std::to_string(tokens.k) + "-mer id");
        }
        // Big-endian digits, most significant first.
        std::int64_t v = id;
        const std::size_t base = out.letters.size();
        out.letters.resize(base + static_cast<std::size_t>(tokens.k));
        for (int d = tokens.k - 1; d >= 0; --d) {
            out.letters[base + static_cast<std::size_t>(d)] =
                static_cast<PLetter>(v % 5);
            v /= 5;
        }
    }
    return out;
}

}  // namespace gs
