#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <vector>

#include "gstk/checkpoint.hpp"
#include "gstk/dataset.hpp"
#include "gstk/errors.hpp"
#include "gstk/metrics.hpp"
#include "gstk/ridge.hpp"
#include "gstk/synth.hpp"
#include "gstk/train.hpp"

using namespace gs;

namespace {

namespace fsys = std::filesystem;

fsys::path temp_file(const std::string& name) {
    return fsys::temp_directory_path() / ("gstk_pipeline_" + name);
}

// Small-but-real training setup used by the train/checkpoint tests.
struct TinyRun {
    Dataset data;
    ModelConfig mcfg;
    TokenizerConfig tcfg;
    TrainConfig cfg;
    std::vector<std::size_t> train_idx, val_idx;
};

TinyRun make_tiny_run(Task task, std::uint64_t seed = 7) {
    TinyRun r;
    SynthSignal signal;
    signal.n_causal = 4;
    signal.k = 3;
    signal.n_classes = 2;
    signal.noise_sd = 0.0;
    r.data = synth_generate(24, 60, task, signal, seed).dataset;

    r.mcfg.embed_width = 8;
    r.mcfg.n_layers = 1;
    r.mcfg.n_heads = 2;
    r.mcfg.mlp_ratio = 2;
    r.mcfg.proj_width = 2;
    r.mcfg.head_hidden = 16;

    r.tcfg.k = 3;
    r.tcfg.mask_prob = 0.15;
    r.tcfg.seed = seed;

    r.cfg.max_epochs = 8;
    r.cfg.patience = 7;
    r.cfg.batch_size = 8;
    r.cfg.lr = 1e-3;
    r.cfg.seed = seed;

    for (std::size_t i = 0; i < 20; ++i) r.train_idx.push_back(i);
    for (std::size_t i = 20; i < 24; ++i) r.val_idx.push_back(i);
    return r;
}

}  // namespace

TEST_CASE("pcc unit cases") {
    const std::vector<double> a = {1, 2, 3};
    CHECK(pcc(a, a) == doctest::Approx(1.0));
    const std::vector<double> rev = {3, 2, 1};
    CHECK(pcc(a, rev) == doctest::Approx(-1.0));
}

TEST_CASE("pcc matches an independent two-pass covariance computation") {
    const std::vector<double> p = {1, 2, 3, 4};
    const std::vector<double> l = {1, 2, 3, 100};

    // oracle: explicit covariance/variance accumulation
    double mp = 0, ml = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        mp += p[i];
        ml += l[i];
    }
    mp /= 4;
    ml /= 4;
    double cov = 0, vp = 0, vl = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        cov += (p[i] - mp) * (l[i] - ml);
        vp += (p[i] - mp) * (p[i] - mp);
        vl += (l[i] - ml) * (l[i] - ml);
    }
    const double oracle = cov / std::sqrt(vp * vl);
    CHECK(std::abs(pcc(p, l) - oracle) < 1e-12);
}

TEST_CASE("pcc affine invariance") {
    Rng rng(3);
    std::vector<double> p(50), l(50);
    for (std::size_t i = 0; i < 50; ++i) {
        p[i] = rng.normal();
        l[i] = rng.normal();
    }
    const double base = pcc(p, l);
    for (double a : {0.5, 2.0, 17.0}) {
        for (double b : {-3.0, 0.0, 11.0}) {
            std::vector<double> q(50);
            for (std::size_t i = 0; i < 50; ++i) q[i] = a * p[i] + b;
            CHECK(std::abs(pcc(q, l) - base) < 1e-9);
        }
    }
}

TEST_CASE("pcc degenerate and mismatched inputs") {
    const std::vector<double> c = {2, 2, 2};
    const std::vector<double> v = {1, 2, 3};
    CHECK_THROWS_AS(pcc(c, v), DegenerateInput);
    CHECK_THROWS_AS(pcc(v, c), DegenerateInput);
    const std::vector<double> one = {1};
    CHECK_THROWS_AS(pcc(one, one), DegenerateInput);
    const std::vector<double> two = {1, 2};
    CHECK_THROWS_AS(pcc(two, v), ShapeError);
}

TEST_CASE("accuracy unit cases") {
    const std::vector<int> t = {0, 1, 2, 1};
    CHECK(accuracy(t, t) == 1.0);
    const std::vector<int> p = {0, 1, 0, 0};
    CHECK(accuracy(p, t) == doctest::Approx(0.5));
}

TEST_CASE("mean and sample std of the worked example") {
    const std::vector<double> vals = {0.6, 0.7, 0.8, 0.9, 1.0};
    CHECK(mean(vals) == doctest::Approx(0.8));
    CHECK(sample_std(vals) == doctest::Approx(std::sqrt(0.025)).epsilon(1e-9));
    const std::vector<double> flat = {0.8, 0.8, 0.8, 0.8, 0.8};
    CHECK(mean(flat) == doctest::Approx(0.8));
    CHECK(sample_std(flat) == 0.0);
}

TEST_CASE("five_fold_split partition laws") {
    const auto folds = five_fold_split(3024, 42);
    std::vector<std::size_t> sizes;
    for (const auto& f : folds) sizes.push_back(f.test.size());
    std::sort(sizes.begin(), sizes.end());
    CHECK(sizes == std::vector<std::size_t>{604, 605, 605, 605, 605});

    std::set<std::size_t> seen;
    for (const auto& f : folds) {
        for (std::size_t i : f.test) {
            CHECK(seen.insert(i).second);  // pairwise disjoint
        }
    }
    CHECK(seen.size() == 3024);  // covering

    // train/val/test of one fold partition everything
    for (const auto& f : folds) {
        std::set<std::size_t> all;
        for (std::size_t i : f.train) all.insert(i);
        for (std::size_t i : f.val) all.insert(i);
        for (std::size_t i : f.test) all.insert(i);
        CHECK(all.size() == 3024);
        const auto expect_val = static_cast<std::size_t>(
            std::ceil(0.1 * static_cast<double>(3024 - f.test.size())));
        CHECK(f.val.size() == expect_val);
    }
}

TEST_CASE("five_fold_split determinism and fuzzed sizes") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 5 + rng.below(400);
        const std::uint64_t seed = rng.next_u64();
        const auto a = five_fold_split(n, seed);
        const auto b = five_fold_split(n, seed);
        for (std::size_t f = 0; f < 5; ++f) {
            CHECK(a[f].test == b[f].test);
            CHECK(a[f].train == b[f].train);
            CHECK(a[f].val == b[f].val);
        }
        std::size_t mn = n, mx = 0, total = 0;
        for (const auto& f : a) {
            mn = std::min(mn, f.test.size());
            mx = std::max(mx, f.test.size());
            total += f.test.size();
        }
        CHECK(mx - mn <= 1);
        CHECK(total == n);
    }
    CHECK_THROWS_AS(five_fold_split(4, 0), ConfigError);
}

TEST_CASE("synth determinism and noise-free oracle") {
    SynthSignal signal;
    signal.n_causal = 6;
    signal.k = 4;
    signal.noise_sd = 0.0;
    const auto a = synth_generate(40, 120, Task::regression, signal, 99);
    const auto b = synth_generate(40, 120, Task::regression, signal, 99);
    for (std::size_t i = 0; i < 40; ++i) {
        CHECK(a.raw[i].to_text() == b.raw[i].to_text());
        CHECK(a.dataset.samples[i].value == b.dataset.samples[i].value);
        CHECK(a.dataset.samples[i].value == a.latent[i]);  // noise-free
    }

    // latent has non-degenerate variation and correlates perfectly with targets
    CHECK(pcc(a.latent, a.latent) == doctest::Approx(1.0));
}

TEST_CASE("synth noise stream is independent of the sequence stream") {
    SynthSignal quiet;
    quiet.n_causal = 6;
    quiet.k = 4;
    quiet.noise_sd = 0.0;
    SynthSignal loud = quiet;
    loud.noise_sd = 2.0;
    const auto a = synth_generate(20, 80, Task::regression, quiet, 123);
    const auto b = synth_generate(20, 80, Task::regression, loud, 123);
    for (std::size_t i = 0; i < 20; ++i) {
        CHECK(a.raw[i].to_text() == b.raw[i].to_text());
        CHECK(a.latent[i] == b.latent[i]);
        CHECK(a.dataset.samples[i].value != b.dataset.samples[i].value);
    }
}

TEST_CASE("synth classification classes are balanced") {
    SynthSignal signal;
    signal.n_causal = 4;
    signal.k = 3;
    signal.n_classes = 4;
    signal.noise_sd = 0.5;
    const auto d = synth_generate(32, 60, Task::classification, signal, 11).dataset;
    std::vector<int> counts(4, 0);
    for (const Sample& s : d.samples) ++counts[static_cast<std::size_t>(s.label)];
    for (int c : counts) CHECK(c == 8);
    CHECK(d.label_names == std::vector<std::string>{"c0", "c1", "c2", "c3"});
}

TEST_CASE("synth config validation") {
    SynthSignal bad;
    bad.n_causal = 10;
    bad.k = 6;
    CHECK_THROWS_AS(synth_generate(10, 30, Task::regression, bad, 0), ConfigError);
    SynthSignal odd;
    odd.n_causal = 3;
    odd.epistatic = true;
    odd.k = 2;
    CHECK_THROWS_AS(synth_generate(10, 100, Task::regression, odd, 0), ConfigError);
}

TEST_CASE("ridge recovers a noise-free linear map") {
    SynthSignal signal;
    signal.n_causal = 20;
    signal.k = 1;  // per-locus letters, exactly linear in the one-hot features
    signal.noise_sd = 0.0;
    const auto synth = synth_generate(200, 400, Task::regression, signal, 31);
    const FoldReport report = ridge_cross_validate(synth.dataset, 0.1, 31);
    CHECK(report.mean_value >= 0.99);
}

TEST_CASE("ridge shrinks to the training mean at huge l2") {
    SynthSignal signal;
    signal.n_causal = 10;
    signal.k = 1;
    signal.noise_sd = 0.0;
    const auto synth = synth_generate(100, 200, Task::regression, signal, 37);
    const FoldReport report = ridge_cross_validate(synth.dataset, 1e30, 37);
    CHECK(std::abs(report.mean_value) < 0.2);
    CHECK_THROWS_AS(ridge_cross_validate(synth.dataset, 0.0, 37), ConfigError);
}

TEST_CASE("ridge null-signal sanity") {
    SynthSignal null_signal;
    null_signal.n_causal = 0;
    null_signal.k = 1;
    null_signal.noise_sd = 1.0;
    const auto synth = synth_generate(500, 300, Task::regression, null_signal, 41);
    const FoldReport report = ridge_cross_validate(synth.dataset, 1.0, 41);
    CHECK(std::abs(report.mean_value) < 0.2);
}

TEST_CASE("ridge classification runs one-vs-rest") {
    SynthSignal signal;
    signal.n_causal = 8;
    signal.k = 1;
    signal.n_classes = 3;
    signal.noise_sd = 0.0;
    const auto synth = synth_generate(120, 150, Task::classification, signal, 43);
    const FoldReport report = ridge_cross_validate(synth.dataset, 1.0, 43);
    CHECK(report.metric_name == "ACC");
    CHECK(report.mean_value > 1.0 / 3.0);  // clearly better than chance
}

TEST_CASE("load_dataset joins sequences with phenotypes") {
    const auto seq_path = temp_file("seq.tsv");
    const auto pheno_path = temp_file("pheno.csv");
    {
        std::ofstream s(seq_path);
        s << "s1\tATCGAT\n"
          << "s2\tTTCGAN\n"
          << "s3\tATYGAT\n";
        std::ofstream p(pheno_path);
        p << "sample_id,trait,value\n";
        p << "s2,height,1.5\n";
        p << "s1,height,2.5\n";
        p << "s3,height,-0.5\n";
        p << "s1,color,red\n";
        p << "s2,color,blue\n";
        p << "s3,color,red\n";
    }
    const Dataset reg = load_dataset(seq_path.string(), pheno_path.string(), "height",
                                     Task::regression);
    REQUIRE(reg.size() == 3);
    CHECK(reg.seq_length == 6);
    CHECK(reg.samples[0].value == 2.5);
    CHECK(reg.samples[1].value == 1.5);
    CHECK(reg.samples[2].value == -0.5);
    CHECK(reg.samples[2].seq.to_text() == "ATXGAT");

    const Dataset cls = load_dataset(seq_path.string(), pheno_path.string(), "color",
                                     Task::classification);
    CHECK(cls.label_names == std::vector<std::string>{"blue", "red"});
    CHECK(cls.samples[0].label == 1);  // s1 red
    CHECK(cls.samples[1].label == 0);  // s2 blue
    fsys::remove(seq_path);
    fsys::remove(pheno_path);
}

TEST_CASE("load_dataset error paths") {
    const auto seq_path = temp_file("seq_err.tsv");
    const auto pheno_path = temp_file("pheno_err.csv");
    {
        std::ofstream s(seq_path);
        s << "s1\tATCG\n"
          << "s2\tTTCG\n";
        std::ofstream p(pheno_path);
        p << "sample_id,trait,value\n";
        p << "s1,height,1.5\n";
        p << "s2,weight,9.9\n";
    }
    try {
        load_dataset(seq_path.string(), pheno_path.string(), "height", Task::regression);
        FAIL("expected JoinError");
    } catch (const JoinError& e) {
        CHECK(std::string(e.what()).find("s2") != std::string::npos);
    }

    {
        std::ofstream p(pheno_path);
        p << "sample_id,trait,value\n";
        p << "s1,height,1.5\n";
        p << "s2,height,NA\n";
    }
    try {
        load_dataset(seq_path.string(), pheno_path.string(), "height", Task::regression);
        FAIL("expected ValueError");
    } catch (const ValueError& e) {
        const std::string msg = e.what();
        CHECK(msg.find(":3") != std::string::npos);  // line number of the NA row
        CHECK(msg.find("NA") != std::string::npos);
    }
    fsys::remove(seq_path);
    fsys::remove(pheno_path);
}

TEST_CASE("train memorizes a tiny classification set") {
    TinyRun r = make_tiny_run(Task::classification);
    r.cfg.max_epochs = 60;
    r.cfg.patience = 59;
    r.cfg.lr = 3e-3;
    r.tcfg.mask_prob = 0.0;
    // train == val: pure memorization check
    const TrainResult res = train(r.data, r.train_idx, r.train_idx, r.mcfg, r.tcfg, r.cfg);
    CHECK(res.best_val_metric >= 0.9);
}

TEST_CASE("train with patience 0 stops at the first non-improving epoch") {
    TinyRun r = make_tiny_run(Task::classification);
    r.cfg.max_epochs = 40;
    r.cfg.patience = 0;
    const TrainResult res = train(r.data, r.train_idx, r.val_idx, r.mcfg, r.tcfg, r.cfg);
    // every epoch before the last must have strictly improved on the running best
    double best = -1e300;
    for (std::size_t e = 0; e + 1 < res.history.size(); ++e) {
        CHECK(res.history[e].val_metric > best);
        best = std::max(best, res.history[e].val_metric);
    }
}

TEST_CASE("early stopping returns the best-validation weights") {
    TinyRun r = make_tiny_run(Task::regression);
    r.cfg.max_epochs = 12;
    r.cfg.patience = 11;
    const TrainResult res = train(r.data, r.train_idx, r.val_idx, r.mcfg, r.tcfg, r.cfg);
    double best = -1e300;
    for (const EpochStats& e : res.history) best = std::max(best, e.val_metric);
    CHECK(res.best_val_metric == doctest::Approx(best));
    CHECK(res.checkpoint.best_epoch == res.best_epoch);
}

TEST_CASE("training histories are bitwise deterministic in the seed") {
    TinyRun r = make_tiny_run(Task::regression);
    const TrainResult a = train(r.data, r.train_idx, r.val_idx, r.mcfg, r.tcfg, r.cfg);
    const TrainResult b = train(r.data, r.train_idx, r.val_idx, r.mcfg, r.tcfg, r.cfg);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t e = 0; e < a.history.size(); ++e) {
        CHECK(a.history[e].train_loss == b.history[e].train_loss);
        CHECK(a.history[e].val_metric == b.history[e].val_metric);
    }
    REQUIRE(a.checkpoint.tensors.size() == b.checkpoint.tensors.size());
    for (std::size_t t = 0; t < a.checkpoint.tensors.size(); ++t) {
        CHECK(a.checkpoint.tensors[t].data == b.checkpoint.tensors[t].data);
    }
}

TEST_CASE("evaluation applies no masking and is repeatable") {
    TinyRun r = make_tiny_run(Task::regression);
    const TrainResult res = train(r.data, r.train_idx, r.val_idx, r.mcfg, r.tcfg, r.cfg);
    const Model model = restore_model(res.checkpoint);
    std::vector<std::size_t> idx(r.data.size());
    std::iota(idx.begin(), idx.end(), 0);
    const auto p1 = predict_dataset(model, r.data, idx, r.tcfg);
    const auto p2 = predict_dataset(model, r.data, idx, r.tcfg);
    for (std::size_t i = 0; i < p1.size(); ++i) {
        CHECK(p1[i].value == p2[i].value);  // bitwise
    }
}

TEST_CASE("checkpoint round-trip preserves predictions bitwise") {
    TinyRun r = make_tiny_run(Task::classification);
    const TrainResult res = train(r.data, r.train_idx, r.val_idx, r.mcfg, r.tcfg, r.cfg);
    const auto path = temp_file("roundtrip.ckpt");
    save_checkpoint(res.checkpoint, path.string());
    const Checkpoint loaded = load_checkpoint(path.string());

    CHECK(loaded.version == kCheckpointVersion);
    CHECK(loaded.model.seq_tokens == res.checkpoint.model.seq_tokens);
    CHECK(loaded.label_names == res.checkpoint.label_names);
    CHECK(loaded.best_epoch == res.checkpoint.best_epoch);
    CHECK(loaded.best_val_metric == res.checkpoint.best_val_metric);

    const Model a = restore_model(res.checkpoint);
    const Model b = restore_model(loaded);
    std::vector<std::size_t> idx(r.data.size());
    std::iota(idx.begin(), idx.end(), 0);
    const auto pa = predict_dataset(a, r.data, idx, r.tcfg);
    const auto pb = predict_dataset(b, r.data, idx, loaded.tokenizer);
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].predicted_class == pb[i].predicted_class);
        CHECK(pa[i].probabilities == pb[i].probabilities);  // bitwise
    }
    fsys::remove(path);
}

TEST_CASE("checkpoint format errors") {
    TinyRun r = make_tiny_run(Task::regression);
    r.cfg.max_epochs = 2;
    r.cfg.patience = 1;
    const TrainResult res = train(r.data, r.train_idx, r.val_idx, r.mcfg, r.tcfg, r.cfg);
    const auto path = temp_file("format.ckpt");
    save_checkpoint(res.checkpoint, path.string());

    // corrupted magic byte
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(1);
        f.put('Z');
    }
    CHECK_THROWS_AS(load_checkpoint(path.string()), FormatError);

    // unknown future version, named in the message
    save_checkpoint(res.checkpoint, path.string());
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(4);
        f.put(static_cast<char>(9));
    }
    try {
        load_checkpoint(path.string());
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        const std::string msg = e.what();
        CHECK(msg.find('9') != std::string::npos);
        CHECK(msg.find('1') != std::string::npos);
    }

    // truncation
    save_checkpoint(res.checkpoint, path.string());
    const auto full_size = fsys::file_size(path);
    fsys::resize_file(path, full_size - 13);
    CHECK_THROWS_AS(load_checkpoint(path.string()), CorruptionError);

    fsys::remove(path);
}

TEST_CASE("evaluate_checkpoint rejects a task mismatch") {
    TinyRun r = make_tiny_run(Task::regression);
    r.cfg.max_epochs = 2;
    r.cfg.patience = 1;
    const TrainResult res = train(r.data, r.train_idx, r.val_idx, r.mcfg, r.tcfg, r.cfg);
    TinyRun c = make_tiny_run(Task::classification);
    CHECK_THROWS_AS(evaluate_checkpoint(res.checkpoint, c.data), ConfigError);
}

TEST_CASE("cross_validate aggregates fold metrics") {
    TinyRun r = make_tiny_run(Task::regression);
    r.cfg.max_epochs = 3;
    r.cfg.patience = 2;
    const CvResult cv = cross_validate(r.data, r.mcfg, r.tcfg, r.cfg);
    REQUIRE(cv.report.fold_values.size() == 5);
    REQUIRE(cv.folds.size() == 5);
    CHECK(cv.report.metric_name == "PCC");
    CHECK(cv.report.mean_value == doctest::Approx(mean(cv.report.fold_values)));
    CHECK(cv.report.std_value == doctest::Approx(sample_std(cv.report.fold_values)));
    CHECK(cv.report.fold_seeds.size() == 5);
    CHECK(cv.report.wall_seconds > 0.0);
}

TEST_CASE("train config validation") {
    TrainConfig cfg;
    cfg.patience = cfg.max_epochs;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    TinyRun r = make_tiny_run(Task::regression);
    CHECK_THROWS_AS(
        train(r.data, {}, r.val_idx, r.mcfg, r.tcfg, cfg), ConfigError);
}
