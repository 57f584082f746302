#include "gstk/snp_codec.hpp"

#include <array>
#include <cctype>
#include <fstream>

#include "gstk/errors.hpp"

namespace gs {

namespace {

constexpr std::array<char, 11> kLetterChars = {'A', 'T', 'C', 'G', 'N', 'Y',
                                               'K', 'W', 'R', 'S', 'M'};

int letter_index(char c) {
    const char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    for (std::size_t i = 0; i < kLetterChars.size(); ++i) {
        if (kLetterChars[i] == u) return static_cast<int>(i);
    }
    return -1;
}

std::string show_char(char c) {
    if (std::isprint(static_cast<unsigned char>(c))) return std::string(1, c);
    char buf[8];
    std::snprintf(buf, sizeof(buf), "\\x%02x", static_cast<unsigned char>(c));
    return buf;
}

}  // namespace

char to_char(SnpLetter l) { return kLetterChars[static_cast<std::size_t>(l)]; }

bool is_snp_letter(char c) { return letter_index(c) >= 0; }

SnpLetter snp_letter_from_char(char c) {
    const int i = letter_index(c);
    if (i < 0) throw ParseError("'" + show_char(c) + "' is not a SNP letter");
    return static_cast<SnpLetter>(i);
}

std::string SnpSequence::to_text() const {
    std::string out;
    out.reserve(letters.size());
    for (SnpLetter l : letters) out.push_back(to_char(l));
    return out;
}

char to_char(PLetter l) {
    constexpr std::array<char, 5> chars = {'A', 'T', 'C', 'G', 'X'};
    return chars[static_cast<std::size_t>(l)];
}

PLetter pletter_from_char(char c) {
    switch (std::toupper(static_cast<unsigned char>(c))) {
        case 'A': return PLetter::A;
        case 'T': return PLetter::T;
        case 'C': return PLetter::C;
        case 'G': return PLetter::G;
        case 'X': return PLetter::X;
        default:
            throw ParseError("'" + show_char(c) + "' is not a preprocessed letter");
    }
}

std::string PreprocessedSequence::to_text() const {
    std::string out;
    out.reserve(letters.size());
    for (PLetter l : letters) out.push_back(to_char(l));
    return out;
}

SnpLetter encode_genotype_pair(char ref_base, char sample_base) {
    auto base_of = [](char c) -> char {
        const char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        if (u == 'A' || u == 'T' || u == 'C' || u == 'G' || u == 'N') return u;
        throw InvalidBase("'" + show_char(c) + "' is not one of A/T/C/G/N");
    };
    const char a = base_of(ref_base);
    const char b = base_of(sample_base);

    if (a == 'N' || b == 'N') return SnpLetter::N;
    if (a == b) return snp_letter_from_char(a);

    // Heterozygous combinations; the pair is unordered.
    const char lo = std::min(a, b);
    const char hi = std::max(a, b);
    if (lo == 'A' && hi == 'T') return SnpLetter::W;
    if (lo == 'A' && hi == 'G') return SnpLetter::R;
    if (lo == 'A' && hi == 'C') return SnpLetter::M;
    if (lo == 'C' && hi == 'T') return SnpLetter::Y;
    if (lo == 'G' && hi == 'T') return SnpLetter::K;
    return SnpLetter::S;  // C with G
}

SnpSequence parse_sequence(std::string id, std::string_view text) {
    if (text.empty()) throw EmptySequence("sequence '" + id + "' has no letters");
    SnpSequence seq;
    seq.id = std::move(id);
    seq.letters.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        const int idx = letter_index(text[i]);
        if (idx < 0) {
            throw ParseError("sequence '" + seq.id + "': illegal letter '" +
                             show_char(text[i]) + "' at offset " + std::to_string(i));
        }
        seq.letters.push_back(static_cast<SnpLetter>(idx));
    }
    return seq;
}

PreprocessedSequence preprocess(const SnpSequence& seq) {
    PreprocessedSequence out;
    out.id = seq.id;
    out.letters.reserve(seq.letters.size());
    for (SnpLetter l : seq.letters) {
        switch (l) {
            case SnpLetter::A: out.letters.push_back(PLetter::A); break;
            case SnpLetter::T: out.letters.push_back(PLetter::T); break;
            case SnpLetter::C: out.letters.push_back(PLetter::C); break;
            case SnpLetter::G: out.letters.push_back(PLetter::G); break;
            default: out.letters.push_back(PLetter::X); break;
        }
    }
    return out;
}

std::vector<SnpSequence> read_sequence_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open sequence file '" + path + "'");

    std::vector<SnpSequence> seqs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;

        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw ParseError(path + ":" + std::to_string(line_no) +
                             ": expected `sample_id<TAB>sequence`");
        }
        std::string id = line.substr(0, tab);
        if (id.empty()) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": empty sample id");
        }
        try {
            seqs.push_back(parse_sequence(std::move(id), std::string_view(line).substr(tab + 1)));
        } catch (const Error& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (seqs.size() > 1 && seqs.back().length() != seqs.front().length()) {
            throw LengthError(path + ":" + std::to_string(line_no) + ": sequence '" +
                              seqs.back().id + "' has length " +
                              std::to_string(seqs.back().length()) + ", expected " +
                              std::to_string(seqs.front().length()));
        }
    }
    return seqs;
}

void write_sequence_file(const std::string& path, const std::vector<SnpSequence>& seqs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write sequence file '" + path + "'");
    for (const SnpSequence& s : seqs) {
        out << s.id << '\t' << s.to_text() << '\n';
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace gs
