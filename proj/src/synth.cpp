#include "gstk/synth.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "gstk/errors.hpp"
#include "gstk/rng.hpp"

namespace gs {

namespace {

constexpr char kBases[4] = {'A', 'T', 'C', 'G'};

std::string sample_name(int i, int n) {
    int width = 1;
    for (int v = n - 1; v >= 10; v /= 10) ++width;
    std::string digits = std::to_string(i);
    return "s" + std::string(static_cast<std::size_t>(width) - digits.size(), '0') + digits;
}

std::string class_name(int c, int n_classes) {
    int width = 1;
    for (int v = n_classes - 1; v >= 10; v /= 10) ++width;
    std::string digits = std::to_string(c);
    return "c" + std::string(static_cast<std::size_t>(width) - digits.size(), '0') + digits;
}

}  // namespace

SynthData synth_generate(int n_samples, int seq_len, Task task,
                         const SynthSignal& signal, std::uint64_t seed) {
    if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
    if (signal.k < 1 || signal.k > kMaxKmer) {
        throw ConfigError("causal window width k out of range: " + std::to_string(signal.k));
    }
    if (signal.n_causal < 0) throw ConfigError("n_causal must be >= 0");
    if (seq_len < signal.k * std::max(signal.n_causal, 1)) {
        throw ConfigError("seq_len " + std::to_string(seq_len) + " too short for " +
                          std::to_string(signal.n_causal) + " causal " +
                          std::to_string(signal.k) + "-mers");
    }
    if (signal.epistatic && signal.n_causal % 2 != 0) {
        throw ConfigError("epistatic mode pairs causal windows, n_causal must be even");
    }
    if (!(signal.het_prob >= 0.0 && signal.het_prob <= 1.0)) {
        throw ConfigError("het_prob must be in [0, 1]");
    }
    if (!(signal.maf_min >= 0.0 && signal.maf_max <= 0.5 && signal.maf_min <= signal.maf_max)) {
        throw ConfigError("minor allele frequency range must satisfy 0 <= min <= max <= 0.5");
    }
    if (!signal.effect_sizes.empty() &&
        static_cast<int>(signal.effect_sizes.size()) != signal.n_causal) {
        throw ConfigError("effect_sizes has " + std::to_string(signal.effect_sizes.size()) +
                          " entries for " + std::to_string(signal.n_causal) +
                          " causal windows");
    }
    if (task == Task::classification && signal.n_classes < 2) {
        throw ConfigError("classification needs n_classes >= 2");
    }
    if (signal.noise_sd < 0.0) throw ConfigError("noise_sd must be >= 0");

    // Independent streams so that, for a fixed seed, changing noise_sd leaves
    // the sequences (and the latent scores) untouched.
    Rng pop_rng(mix_seed(seed, 0xB10C0DE));
    Rng ind_rng(mix_seed(seed, 0x5EED5));
    Rng noise_rng(mix_seed(seed, 0xA015E));

    const int n_windows = seq_len / signal.k;

    // Population structure: per-locus major/minor alleles and frequencies.
    std::vector<char> major(static_cast<std::size_t>(seq_len));
    std::vector<char> minor(static_cast<std::size_t>(seq_len));
    std::vector<double> maf(static_cast<std::size_t>(seq_len));
    for (int p = 0; p < seq_len; ++p) {
        const int a = static_cast<int>(pop_rng.below(4));
        int b = static_cast<int>(pop_rng.below(3));
        if (b >= a) ++b;
        major[static_cast<std::size_t>(p)] = kBases[a];
        minor[static_cast<std::size_t>(p)] = kBases[b];
        maf[static_cast<std::size_t>(p)] = pop_rng.uniform(signal.maf_min, signal.maf_max);
    }

    // Causal windows on the token grid.
    std::vector<int> windows(static_cast<std::size_t>(n_windows));
    std::iota(windows.begin(), windows.end(), 0);
    pop_rng.shuffle(windows);
    windows.resize(static_cast<std::size_t>(signal.n_causal));
    std::sort(windows.begin(), windows.end());

    std::vector<double> effects = signal.effect_sizes;
    if (effects.empty()) {
        effects.resize(static_cast<std::size_t>(signal.n_causal));
        for (double& e : effects) e = pop_rng.uniform() < 0.5 ? 1.0 : -1.0;
    }

    SynthData out;
    out.raw.reserve(static_cast<std::size_t>(n_samples));
    out.latent.reserve(static_cast<std::size_t>(n_samples));

    std::vector<double> noisy(static_cast<std::size_t>(n_samples));
    for (int i = 0; i < n_samples; ++i) {
        SnpSequence seq;
        seq.id = sample_name(i, n_samples);
        seq.letters.reserve(static_cast<std::size_t>(seq_len));
        for (int p = 0; p < seq_len; ++p) {
            const auto sp = static_cast<std::size_t>(p);
            const char base = ind_rng.uniform() < maf[sp] ? minor[sp] : major[sp];
            if (ind_rng.uniform() < signal.het_prob) {
                seq.letters.push_back(encode_genotype_pair(major[sp], minor[sp]));
            } else {
                seq.letters.push_back(snp_letter_from_char(base));
            }
        }

        // Window indicator: every locus in the window carries its major
        // allele (a heterozygous letter never matches).
        auto indicator = [&](int w) -> double {
            for (int j = 0; j < signal.k; ++j) {
                const auto sp = static_cast<std::size_t>(w * signal.k + j);
                if (to_char(seq.letters[sp]) != major[sp]) return 0.0;
            }
            return 1.0;
        };

        double z = 0.0;
        if (signal.epistatic) {
            for (int m = 0; m < signal.n_causal / 2; ++m) {
                z += effects[static_cast<std::size_t>(m)] *
                     indicator(windows[static_cast<std::size_t>(2 * m)]) *
                     indicator(windows[static_cast<std::size_t>(2 * m + 1)]);
            }
        } else {
            for (int m = 0; m < signal.n_causal; ++m) {
                z += effects[static_cast<std::size_t>(m)] *
                     indicator(windows[static_cast<std::size_t>(m)]);
            }
        }
        out.latent.push_back(z);
        noisy[static_cast<std::size_t>(i)] =
            z + (signal.noise_sd > 0.0 ? noise_rng.normal(0.0, signal.noise_sd) : 0.0);
        out.raw.push_back(std::move(seq));
    }

    Dataset& ds = out.dataset;
    ds.task = task;
    ds.seq_length = static_cast<std::size_t>(seq_len);
    ds.samples.resize(static_cast<std::size_t>(n_samples));
    for (int i = 0; i < n_samples; ++i) {
        const auto si = static_cast<std::size_t>(i);
        ds.samples[si].id = out.raw[si].id;
        ds.samples[si].seq = preprocess(out.raw[si]);
    }

    if (task == Task::regression) {
        for (int i = 0; i < n_samples; ++i) {
            ds.samples[static_cast<std::size_t>(i)].value = noisy[static_cast<std::size_t>(i)];
        }
    } else {
        // Balanced classes by rank of the (noisy) score; ties break by index.
        std::vector<int> order(static_cast<std::size_t>(n_samples));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return noisy[static_cast<std::size_t>(a)] < noisy[static_cast<std::size_t>(b)];
        });
        ds.label_names.clear();
        for (int c = 0; c < signal.n_classes; ++c) {
            ds.label_names.push_back(class_name(c, signal.n_classes));
        }
        for (int rank = 0; rank < n_samples; ++rank) {
            const int label = std::min(
                signal.n_classes - 1,
                static_cast<int>(static_cast<long long>(rank) * signal.n_classes / n_samples));
            auto& s = ds.samples[static_cast<std::size_t>(order[static_cast<std::size_t>(rank)])];
            s.label = label;
            s.value = static_cast<double>(label);
        }
    }
    return out;
}

}  // namespace gs
