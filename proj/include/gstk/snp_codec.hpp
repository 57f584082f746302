#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gs {

// The 11-letter SNP alphabet. A/T/C/G code homozygous sites, Y/K/W/R/S/M the
// six heterozygous base combinations, and N any site with an unsequenced base.
enum class SnpLetter : std::uint8_t { A, T, C, G, N, Y, K, W, R, S, M };

char to_char(SnpLetter l);
bool is_snp_letter(char c);                // case-insensitive
SnpLetter snp_letter_from_char(char c);    // ParseError on anything else

struct SnpSequence {
    std::string id;
    std::vector<SnpLetter> letters;

    std::size_t length() const { return letters.size(); }
    std::string to_text() const;
};

// Alphabet after the many-to-one collapse: A/T/C/G keep their identity, every
// heterozygous or undetermined letter becomes X. The enum values double as
// the base-5 digits used by the tokenizer.
enum class PLetter : std::uint8_t { A = 0, T = 1, C = 2, G = 3, X = 4 };

char to_char(PLetter l);
PLetter pletter_from_char(char c);

struct PreprocessedSequence {
    std::string id;
    std::vector<PLetter> letters;

    std::size_t length() const { return letters.size(); }
    std::string to_text() const;
};

// Unordered {ref, sample} base pair -> SNP letter. Bases are A/T/C/G/N
// (case-insensitive); a pair containing N codes as N. InvalidBase otherwise.
SnpLetter encode_genotype_pair(char ref_base, char sample_base);

// Case-insensitive parse of a letter string. EmptySequence on empty input,
// ParseError (with the 0-based offset) on any character outside the alphabet;
// whitespace inside a sequence is an error, not skipped.
SnpSequence parse_sequence(std::string id, std::string_view text);

PreprocessedSequence preprocess(const SnpSequence& seq);

// Sequence file: UTF-8 text, one `sample_id<TAB>sequence` record per line,
// '#'-prefixed comment lines, all sequences of equal length.
std::vector<SnpSequence> read_sequence_file(const std::string& path);
void write_sequence_file(const std::string& path, const std::vector<SnpSequence>& seqs);

}  // namespace gs
