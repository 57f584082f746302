#include "gstk/ablate.hpp"

#include <cstdio>

#include "gstk/errors.hpp"

namespace gs {

namespace {

std::string format_prob(double p) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.2f", p);
    return buf;
}

GridRow run_cell(const std::string& label, const Dataset& data, ModelConfig mcfg,
                 TokenizerConfig tok, const TrainConfig& cfg) {
    mcfg.seq_tokens = 0;  // re-derived per cell, k varies
    mcfg.k = tok.k;
    CvResult cv = cross_validate(data, mcfg, tok, cfg);
    GridRow row;
    row.cell = label;
    row.metric_name = cv.report.metric_name;
    row.mean_value = cv.report.mean_value;
    row.std_value = cv.report.std_value;
    row.fold_values = cv.report.fold_values;
    return row;
}

}  // namespace

GridKind grid_kind_from_name(const std::string& name) {
    if (name == "k" || name == "kmer") return GridKind::kmer;
    if (name == "mask") return GridKind::mask;
    if (name == "component") return GridKind::component;
    throw ConfigError("unknown grid '" + name + "', expected k, mask, or component");
}

std::vector<GridRow> run_grid(GridKind kind, const Dataset& data, ModelConfig mcfg,
                              TokenizerConfig base_tok, TrainConfig cfg) {
    base_tok.validate();
    std::vector<GridRow> rows;

    switch (kind) {
        case GridKind::mask: {
            for (double p : {0.0, 0.15, 0.30, 0.45, 0.60}) {
                TokenizerConfig tok = base_tok;
                tok.mask_prob = p;
                rows.push_back(run_cell(format_prob(p), data, mcfg, tok, cfg));
            }
            break;
        }
        case GridKind::kmer: {
            for (int k = 1; k <= 8; ++k) {
                TokenizerConfig tok = base_tok;
                tok.k = k;
                rows.push_back(run_cell(std::to_string(k), data, mcfg, tok, cfg));
            }
            break;
        }
        case GridKind::component: {
            struct Cell {
                const char* label;
                bool kmer_on;
                bool mask_on;
            };
            // Character-level tokenization is the k-mer-off baseline.
            const Cell cells[] = {
                {"-kmer-mask", false, false},
                {"-kmer+mask", false, true},
                {"+kmer-mask", true, false},
                {"+kmer+mask", true, true},
            };
            for (const Cell& c : cells) {
                TokenizerConfig tok = base_tok;
                tok.k = c.kmer_on ? base_tok.k : 1;
                tok.mask_prob = c.mask_on ? base_tok.mask_prob : 0.0;
                rows.push_back(run_cell(c.label, data, mcfg, tok, cfg));
            }
            break;
        }
    }
    return rows;
}

}  // namespace gs
