// Command-line driver: tokenize, cv, ablate, predict, synth.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include "gstk/ablate.hpp"
#include "gstk/checkpoint.hpp"
#include "gstk/dataset.hpp"
#include "gstk/errors.hpp"
#include "gstk/manifest.hpp"
#include "gstk/ridge.hpp"
#include "gstk/synth.hpp"
#include "gstk/tokenizer.hpp"
#include "gstk/train.hpp"

namespace fs = std::filesystem;

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw gs::IoError("cannot write '" + path + "'");
    return out;
}

struct DataOptions {
    std::string sequences;
    std::string phenotypes;
    std::string trait;
    std::string task = "regression";
};

struct ModelOptions {
    int embed_width = 32;
    int layers = 3;
    int heads = 4;
    int mlp_ratio = 4;
    int proj_width = 4;
    int head_hidden = 256;
    std::string activation = "gelu";

    gs::ModelConfig to_config() const {
        gs::ModelConfig cfg;
        cfg.embed_width = embed_width;
        cfg.n_layers = layers;
        cfg.n_heads = heads;
        cfg.mlp_ratio = mlp_ratio;
        cfg.proj_width = proj_width;
        cfg.head_hidden = head_hidden;
        if (activation == "gelu") {
            cfg.activation = gs::ModelConfig::Act::gelu;
        } else if (activation == "relu") {
            cfg.activation = gs::ModelConfig::Act::relu;
        } else {
            throw gs::ConfigError("unknown activation '" + activation + "'");
        }
        return cfg;
    }
};

struct TrainOptions {
    int k = 6;
    double mask_prob = 0.15;
    std::uint64_t seed = 0;
    int epochs = 80;
    int patience = 10;
    int batch = 16;
    double lr = 1e-4;
    double weight_decay = 0.01;
    double val_fraction = 0.1;

    gs::TokenizerConfig tokenizer() const {
        gs::TokenizerConfig t;
        t.k = k;
        t.mask_prob = mask_prob;
        t.seed = seed;
        return t;
    }

    gs::TrainConfig train() const {
        gs::TrainConfig t;
        t.max_epochs = epochs;
        t.patience = patience;
        t.batch_size = batch;
        t.lr = lr;
        t.weight_decay = weight_decay;
        t.seed = seed;
        t.val_fraction = val_fraction;
        return t;
    }
};

void add_data_flags(CLI::App* cmd, DataOptions& o) {
    cmd->add_option("--sequences", o.sequences, "Sequence file")->required();
    cmd->add_option("--phenotypes", o.phenotypes, "Phenotype CSV")->required();
    cmd->add_option("--trait", o.trait, "Trait name to select")->required();
    cmd->add_option("--task", o.task, "classification or regression")->required();
}

void add_model_flags(CLI::App* cmd, ModelOptions& o) {
    cmd->add_option("--embed-width", o.embed_width, "Embedding width");
    cmd->add_option("--layers", o.layers, "Encoder blocks");
    cmd->add_option("--heads", o.heads, "Attention heads");
    cmd->add_option("--mlp-ratio", o.mlp_ratio, "Encoder MLP expansion");
    cmd->add_option("--proj-width", o.proj_width, "Projector output width");
    cmd->add_option("--head-hidden", o.head_hidden, "Head MLP hidden width");
    cmd->add_option("--activation", o.activation, "gelu or relu");
}

void add_train_flags(CLI::App* cmd, TrainOptions& o) {
    cmd->add_option("--k", o.k, "k-mer width");
    cmd->add_option("--mask-prob", o.mask_prob, "Masking probability");
    cmd->add_option("--seed", o.seed, "Global seed");
    cmd->add_option("--epochs", o.epochs, "Max epochs");
    cmd->add_option("--patience", o.patience, "Early-stop patience");
    cmd->add_option("--batch", o.batch, "Batch size");
    cmd->add_option("--lr", o.lr, "Learning rate");
    cmd->add_option("--weight-decay", o.weight_decay, "Decoupled weight decay");
    cmd->add_option("--val-fraction", o.val_fraction, "Validation carve-out");
}

void add_manifest_train_entries(gs::ManifestWriter& m, const TrainOptions& t,
                                const ModelOptions& mo) {
    m.add("k", static_cast<std::int64_t>(t.k));
    m.add("mask_prob", t.mask_prob);
    m.add("seed", t.seed);
    m.add("epochs", static_cast<std::int64_t>(t.epochs));
    m.add("patience", static_cast<std::int64_t>(t.patience));
    m.add("batch", static_cast<std::int64_t>(t.batch));
    m.add("lr", t.lr);
    m.add("weight_decay", t.weight_decay);
    m.add("val_fraction", t.val_fraction);
    m.add("embed_width", static_cast<std::int64_t>(mo.embed_width));
    m.add("layers", static_cast<std::int64_t>(mo.layers));
    m.add("heads", static_cast<std::int64_t>(mo.heads));
    m.add("mlp_ratio", static_cast<std::int64_t>(mo.mlp_ratio));
    m.add("proj_width", static_cast<std::int64_t>(mo.proj_width));
    m.add("head_hidden", static_cast<std::int64_t>(mo.head_hidden));
    m.add("activation", mo.activation);
}

// ---- tokenize ----

int cmd_tokenize(const std::string& sequences, int k, const std::string& out_path) {
    gs::ManifestWriter manifest("tokenize");
    gs::TokenizerConfig tcfg;
    tcfg.k = k;
    tcfg.validate();

    const auto seqs = gs::read_sequence_file(sequences);
    auto out = open_out(out_path);
    for (const gs::SnpSequence& s : seqs) {
        const gs::TokenIds ids = gs::kmer_tokenize(gs::preprocess(s), tcfg);
        out << s.id;
        char sep = '\t';
        for (gs::TokenId id : ids.ids) {
            out << sep << id;
            sep = ' ';
        }
        out << '\n';
    }
    if (!out) throw gs::IoError("write failed for '" + out_path + "'");

    manifest.add("k", static_cast<std::int64_t>(k));
    manifest.add_input("sequences", sequences);
    manifest.add("output", out_path);
    manifest.write(out_path + ".manifest");
    return 0;
}

// ---- cv ----

void write_metrics_csv(const std::string& path, const gs::FoldReport& report) {
    auto out = open_out(path);
    out << "fold,metric,value\n";
    for (std::size_t f = 0; f < report.fold_values.size(); ++f) {
        out << f << ',' << report.metric_name << ',' << fmt_double(report.fold_values[f])
            << '\n';
    }
    out << "mean," << report.metric_name << ',' << fmt_double(report.mean_value) << '\n';
    out << "std," << report.metric_name << ',' << fmt_double(report.std_value) << '\n';
}

void write_history_csv(const std::string& path, const std::vector<gs::EpochStats>& history) {
    auto out = open_out(path);
    out << "epoch,train_loss,val_metric\n";
    for (const gs::EpochStats& e : history) {
        out << e.epoch << ',' << fmt_double(e.train_loss) << ',' << fmt_double(e.val_metric)
            << '\n';
    }
}

int cmd_cv(const DataOptions& data_opt, const ModelOptions& model_opt,
           const TrainOptions& train_opt, const std::string& out_dir) {
    gs::ManifestWriter manifest("cv");
    fs::create_directories(out_dir);

    const gs::Task task = gs::task_from_name(data_opt.task);
    const gs::Dataset data =
        gs::load_dataset(data_opt.sequences, data_opt.phenotypes, data_opt.trait, task);

    gs::CvResult cv = gs::cross_validate(data, model_opt.to_config(), train_opt.tokenizer(),
                                         train_opt.train());

    write_metrics_csv((fs::path(out_dir) / "metrics.csv").string(), cv.report);
    for (std::size_t f = 0; f < cv.folds.size(); ++f) {
        const std::string stem = "fold" + std::to_string(f);
        gs::save_checkpoint(cv.folds[f].checkpoint,
                            (fs::path(out_dir) / (stem + ".ckpt")).string());
        write_history_csv((fs::path(out_dir) / ("history_" + stem + ".csv")).string(),
                          cv.folds[f].history);
    }

    manifest.add_input("sequences", data_opt.sequences);
    manifest.add_input("phenotypes", data_opt.phenotypes);
    manifest.add("trait", data_opt.trait);
    manifest.add("task", data_opt.task);
    add_manifest_train_entries(manifest, train_opt, model_opt);
    manifest.add("metric", cv.report.metric_name);
    manifest.add("mean", cv.report.mean_value);
    manifest.add("std", cv.report.std_value);
    manifest.add("out_dir", out_dir);
    manifest.write((fs::path(out_dir) / "manifest.txt").string());

    std::cout << cv.report.metric_name << " mean=" << fmt_double(cv.report.mean_value)
              << " std=" << fmt_double(cv.report.std_value) << '\n';
    return 0;
}

// ---- ablate ----

int cmd_ablate(const std::string& grid_name, const DataOptions& data_opt,
               const ModelOptions& model_opt, const TrainOptions& train_opt,
               const std::string& out_dir) {
    gs::ManifestWriter manifest("ablate");
    fs::create_directories(out_dir);

    const gs::GridKind kind = gs::grid_kind_from_name(grid_name);
    const gs::Task task = gs::task_from_name(data_opt.task);
    const gs::Dataset data =
        gs::load_dataset(data_opt.sequences, data_opt.phenotypes, data_opt.trait, task);

    const auto rows = gs::run_grid(kind, data, model_opt.to_config(), train_opt.tokenizer(),
                                   train_opt.train());

    const std::string grid_path = (fs::path(out_dir) / "grid.csv").string();
    auto out = open_out(grid_path);
    out << "cell,metric,mean,std\n";
    for (const gs::GridRow& row : rows) {
        out << row.cell << ',' << row.metric_name << ',' << fmt_double(row.mean_value) << ','
            << fmt_double(row.std_value) << '\n';
    }
    out.close();

    manifest.add("grid", grid_name);
    manifest.add_input("sequences", data_opt.sequences);
    manifest.add_input("phenotypes", data_opt.phenotypes);
    manifest.add("trait", data_opt.trait);
    manifest.add("task", data_opt.task);
    add_manifest_train_entries(manifest, train_opt, model_opt);
    manifest.add("out_dir", out_dir);
    manifest.write((fs::path(out_dir) / "manifest.txt").string());

    std::cout << "wrote " << rows.size() << " grid rows to " << grid_path << '\n';
    return 0;
}

// ---- predict ----

int cmd_predict(const std::string& ckpt_path, const std::string& sequences,
                const std::string& out_path) {
    gs::ManifestWriter manifest("predict");
    const gs::Checkpoint ckpt = gs::load_checkpoint(ckpt_path);
    const gs::Model model = gs::restore_model(ckpt);
    const auto seqs = gs::read_sequence_file(sequences);
    if (seqs.empty()) throw gs::EmptySequence("no sequences in '" + sequences + "'");

    const int expect_tokens = ckpt.model.seq_tokens;
    const int have_tokens = static_cast<int>(seqs.front().length()) / ckpt.tokenizer.k;
    if (have_tokens != expect_tokens) {
        throw gs::ConfigError("checkpoint expects " + std::to_string(expect_tokens) +
                              " tokens per sequence, these sequences give " +
                              std::to_string(have_tokens) + " (length " +
                              std::to_string(seqs.front().length()) + ", k=" +
                              std::to_string(ckpt.tokenizer.k) + ")");
    }

    auto out = open_out(out_path);
    out << "sample_id,prediction";
    if (ckpt.model.task == gs::Task::classification) {
        for (const std::string& name : ckpt.label_names) out << ",p_" << name;
    }
    out << '\n';

    gs::NoGradGuard ng;
    for (const gs::SnpSequence& s : seqs) {
        const gs::TokenIds ids = gs::kmer_tokenize(gs::preprocess(s), ckpt.tokenizer);
        const gs::PhenotypePrediction pred = model.predict(ids.ids);
        if (ckpt.model.task == gs::Task::classification) {
            out << s.id << ','
                << ckpt.label_names[static_cast<std::size_t>(pred.predicted_class)];
            for (double p : pred.probabilities) out << ',' << fmt_double(p);
        } else {
            out << s.id << ',' << fmt_double(pred.value);
        }
        out << '\n';
    }
    if (!out) throw gs::IoError("write failed for '" + out_path + "'");

    manifest.add_input("checkpoint", ckpt_path);
    manifest.add_input("sequences", sequences);
    manifest.add("output", out_path);
    manifest.write(out_path + ".manifest");
    return 0;
}

// ---- synth ----

int cmd_synth(int n, int len, const std::string& task_name, int causal, double noise,
              bool epistatic, int classes, int k, double het, double maf_min,
              double maf_max, const std::string& trait, std::uint64_t seed,
              const std::string& out_prefix) {
    gs::ManifestWriter manifest("synth");
    const gs::Task task = gs::task_from_name(task_name);

    gs::SynthSignal signal;
    signal.n_causal = causal;
    signal.noise_sd = noise;
    signal.epistatic = epistatic;
    signal.k = k;
    signal.n_classes = classes;
    signal.het_prob = het;
    signal.maf_min = maf_min;
    signal.maf_max = maf_max;

    const gs::SynthData synth = gs::synth_generate(n, len, task, signal, seed);

    const std::string seq_path = out_prefix + ".sequences.tsv";
    const std::string pheno_path = out_prefix + ".phenotypes.csv";
    const std::string oracle_path = out_prefix + ".oracle.csv";

    gs::write_sequence_file(seq_path, synth.raw);

    auto pheno = open_out(pheno_path);
    pheno << "sample_id,trait,value\n";
    for (const gs::Sample& s : synth.dataset.samples) {
        pheno << s.id << ',' << trait << ',';
        if (task == gs::Task::classification) {
            pheno << synth.dataset.label_names[static_cast<std::size_t>(s.label)];
        } else {
            pheno << fmt_double(s.value);
        }
        pheno << '\n';
    }
    pheno.close();

    auto oracle = open_out(oracle_path);
    oracle << "sample_id,latent\n";
    for (std::size_t i = 0; i < synth.dataset.samples.size(); ++i) {
        oracle << synth.dataset.samples[i].id << ',' << fmt_double(synth.latent[i]) << '\n';
    }
    oracle.close();

    manifest.add("n", static_cast<std::int64_t>(n));
    manifest.add("len", static_cast<std::int64_t>(len));
    manifest.add("task", task_name);
    manifest.add("causal", static_cast<std::int64_t>(causal));
    manifest.add("noise", noise);
    manifest.add("epistatic", std::string(epistatic ? "true" : "false"));
    manifest.add("classes", static_cast<std::int64_t>(classes));
    manifest.add("k", static_cast<std::int64_t>(k));
    manifest.add("het", het);
    manifest.add("maf_min", maf_min);
    manifest.add("maf_max", maf_max);
    manifest.add("trait", trait);
    manifest.add("seed", seed);
    manifest.add("sequences", seq_path);
    manifest.add("phenotypes", pheno_path);
    manifest.add("oracle", oracle_path);
    manifest.write(out_prefix + ".manifest");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Genomic selection toolkit: SNP sequences to phenotype predictions"};
    app.require_subcommand(1);

    // tokenize
    std::string tok_sequences, tok_out;
    int tok_k = 6;
    auto* tokenize = app.add_subcommand("tokenize", "Write the token dump for a sequence file");
    tokenize->add_option("--sequences", tok_sequences, "Sequence file")->required();
    tokenize->add_option("--k", tok_k, "k-mer width");
    tokenize->add_option("--out", tok_out, "Output path")->required();

    // cv
    DataOptions cv_data;
    ModelOptions cv_model;
    TrainOptions cv_train;
    std::string cv_out_dir;
    auto* cv = app.add_subcommand("cv", "Five-fold cross-validated training");
    add_data_flags(cv, cv_data);
    add_model_flags(cv, cv_model);
    add_train_flags(cv, cv_train);
    cv->add_option("--out-dir", cv_out_dir, "Output directory")->required();

    // ablate
    DataOptions ab_data;
    ModelOptions ab_model;
    TrainOptions ab_train;
    std::string ab_out_dir, ab_grid;
    auto* ablate = app.add_subcommand("ablate", "Run an ablation grid");
    ablate->add_option("--grid", ab_grid, "k, mask, or component")->required();
    add_data_flags(ablate, ab_data);
    add_model_flags(ablate, ab_model);
    add_train_flags(ablate, ab_train);
    ablate->add_option("--out-dir", ab_out_dir, "Output directory")->required();

    // predict
    std::string pr_ckpt, pr_sequences, pr_out;
    auto* predict = app.add_subcommand("predict", "Predict phenotypes from a checkpoint");
    predict->add_option("--checkpoint", pr_ckpt, "Checkpoint file")->required();
    predict->add_option("--sequences", pr_sequences, "Sequence file")->required();
    predict->add_option("--out", pr_out, "Predictions CSV")->required();

    // synth
    int sy_n = 100, sy_len = 3000, sy_causal = 20, sy_classes = 2, sy_k = 6;
    double sy_noise = 0.0, sy_het = 0.05, sy_maf_min = 0.05, sy_maf_max = 0.30;
    bool sy_epistatic = false;
    std::uint64_t sy_seed = 0;
    std::string sy_task = "regression", sy_trait = "synthetic", sy_prefix;
    auto* synth = app.add_subcommand("synth", "Generate a planted-signal dataset");
    synth->add_option("--n", sy_n, "Samples")->required();
    synth->add_option("--len", sy_len, "Sequence length")->required();
    synth->add_option("--task", sy_task, "classification or regression");
    synth->add_option("--causal", sy_causal, "Causal windows");
    synth->add_option("--noise", sy_noise, "Gaussian noise sd");
    synth->add_flag("--epistatic", sy_epistatic, "Pairwise-product signal");
    synth->add_option("--classes", sy_classes, "Classes (classification)");
    synth->add_option("--k", sy_k, "Causal window width");
    synth->add_option("--het", sy_het, "Heterozygous letter rate");
    synth->add_option("--maf-min", sy_maf_min, "Minor allele frequency lower bound");
    synth->add_option("--maf-max", sy_maf_max, "Minor allele frequency upper bound");
    synth->add_option("--trait", sy_trait, "Trait name in the phenotype file");
    synth->add_option("--seed", sy_seed, "Seed");
    synth->add_option("--out-prefix", sy_prefix, "Output prefix")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (tokenize->parsed()) return cmd_tokenize(tok_sequences, tok_k, tok_out);
        if (cv->parsed()) return cmd_cv(cv_data, cv_model, cv_train, cv_out_dir);
        if (ablate->parsed()) {
            return cmd_ablate(ab_grid, ab_data, ab_model, ab_train, ab_out_dir);
        }
        if (predict->parsed()) return cmd_predict(pr_ckpt, pr_sequences, pr_out);
        if (synth->parsed()) {
            return cmd_synth(sy_n, sy_len, sy_task, sy_causal, sy_noise, sy_epistatic,
                             sy_classes, sy_k, sy_het, sy_maf_min, sy_maf_max, sy_trait,
                             sy_seed, sy_prefix);
        }
    } catch (const gs::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
