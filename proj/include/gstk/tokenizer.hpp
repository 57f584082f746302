#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gstk/rng.hpp"
#include "gstk/snp_codec.hpp"

namespace gs {

using TokenId = std::int32_t;

// k is capped at 12 so 5^k stays inside 32-bit token ids and the embedding
// table stays bounded.
constexpr int kMaxKmer = 12;

struct TokenizerConfig {
    int k = 6;
    double mask_prob = 0.15;
    std::uint64_t seed = 0;

    void validate() const;  // ConfigError outside 1<=k<=12 or 0<=p<=1
};

struct TokenIds {
    std::vector<TokenId> ids;
    int k = 0;

    std::size_t size() const { return ids.size(); }
};

struct MaskedTokenIds {
    std::vector<TokenId> ids;
    TokenId mask_id = 0;
    std::vector<std::int32_t> mask_positions;  // sorted, ids[i]==mask_id iff i listed
    int k = 0;
};

// 5^k legal k-mers plus one reserved mask/unknown slot.
std::int64_t vocab_size(int k);

// Reserved id, the `+1` slot of the vocabulary.
TokenId mask_token_id(int k);

// Big-endian base-5 value of a k-mer under the digit map A=0,T=1,C=2,G=3,X=4.
// Bijective over all 5^k k-mers. TokenizeError on a length mismatch.
TokenId token_id(std::span<const PLetter> kmer, int k);

// Consecutive non-overlapping windows of width k, left to right; a trailing
// remainder shorter than k is dropped, so |output| = floor(N_l/k).
// SequenceTooShort when the sequence has fewer than k letters.
TokenIds kmer_tokenize(const PreprocessedSequence& seq, const TokenizerConfig& cfg);

// RNG stream for masking one sample in one epoch. Deriving the stream from
// (seed, sample, epoch) keeps masking independent of execution order.
Rng mask_rng(const TokenizerConfig& cfg, std::uint64_t sample_index, std::uint64_t epoch);

// Each position is independently replaced by mask_id with probability
// cfg.mask_prob.
MaskedTokenIds random_mask(const TokenIds& tokens, const TokenizerConfig& cfg, Rng& rng);

// Inverse of kmer_tokenize on the token array (the dropped remainder is
// gone). NotInvertible if any id is the mask id.
PreprocessedSequence detokenize(const TokenIds& tokens);

}  // namespace gs
