#pragma once

#include <cstdint>
#include <vector>

#include "gstk/dataset.hpp"
#include "gstk/snp_codec.hpp"

namespace gs {

// Planted-signal generator. Sequences are drawn per locus from a two-allele
// population model (major/minor letters over A/T/C/G with a per-locus minor
// frequency) plus a heterozygous-letter rate; the regression target is the
// sum of per-window effects, each gated by "this k-aligned window carries its
// all-major pattern", plus gaussian noise. Epistatic mode gates consecutive
// window pairs on the product of their indicators.
struct SynthSignal {
    int n_causal = 20;
    std::vector<double> effect_sizes;  // empty: unit magnitude, random sign
    double noise_sd = 0.0;
    bool epistatic = false;
    int k = 6;           // causal window width, aligned to the token grid
    int n_classes = 2;   // classification only
    double het_prob = 0.05;
    double maf_min = 0.05;
    double maf_max = 0.30;
};

struct SynthData {
    Dataset dataset;
    std::vector<double> latent;    // oracle score per sample, noise-free
    std::vector<SnpSequence> raw;  // 11-letter sequences, for file output
};

SynthData synth_generate(int n_samples, int seq_len, Task task,
                         const SynthSignal& signal, std::uint64_t seed);

}  // namespace gs
