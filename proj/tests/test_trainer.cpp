#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "core/error.hpp"
#include "core/trainer.hpp"
#include "oracles.hpp"

using namespace dmrm;
namespace fs = std::filesystem;

namespace {

ModelConfig small_model() {
    ModelConfig m;
    m.embed_dim = 6;
    m.hidden = 6;
    m.d_track = 5;
    m.d_locate = 5;
    m.n_hops = 3;
    return m;
}

TrainConfig small_train(int steps, int warmup, int batch = 64) {
    TrainConfig cfg;
    cfg.total_steps = steps;
    cfg.warmup_steps = warmup;
    cfg.batch_size = batch;
    cfg.model = small_model();
    return cfg;
}

fs::path scratch_dir() {
    const fs::path dir = fs::temp_directory_path() / "dmrm_test_trainer";
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("the learning-rate schedule ramps up then decays to the floor") {
    TrainConfig cfg = small_train(200, 20);

    CHECK(lr_schedule(cfg, 0) == cfg.min_lr);
    CHECK(lr_schedule(cfg, 20) == cfg.min_lr + (cfg.base_lr - cfg.min_lr));
    CHECK(lr_schedule(cfg, 10) == cfg.min_lr + (cfg.base_lr - cfg.min_lr) * 0.5);
    CHECK(lr_schedule(cfg, 110) == cfg.base_lr - (cfg.base_lr - cfg.min_lr) * 0.5);
    CHECK(lr_schedule(cfg, 200) == cfg.min_lr);
    CHECK(lr_schedule(cfg, 5000) == cfg.min_lr);

    for (int s = 1; s <= 20; ++s) CHECK(lr_schedule(cfg, s) >= lr_schedule(cfg, s - 1));
    for (int s = 21; s <= 200; ++s) CHECK(lr_schedule(cfg, s) <= lr_schedule(cfg, s - 1));

    SUBCASE("no warmup starts at the base rate") {
        cfg.warmup_steps = 0;
        CHECK(lr_schedule(cfg, 0) == cfg.base_lr);
        CHECK(lr_schedule(cfg, 100) == cfg.base_lr - (cfg.base_lr - cfg.min_lr) * 0.5);
    }

    SUBCASE("negative steps are rejected") {
        CHECK_THROWS_WITH_AS(lr_schedule(cfg, -1), "step must be non-negative", Error);
    }
}

TEST_CASE("training configuration validation") {
    TrainConfig cfg = small_train(10, 2);
    CHECK_NOTHROW(cfg.validate());

    auto expect = [&](void (*mutate)(TrainConfig&), const char* msg) {
        TrainConfig c = cfg;
        mutate(c);
        CHECK_THROWS_WITH_AS(c.validate(), msg, Error);
    };
    expect([](TrainConfig& c) { c.base_lr = 0; }, "learning rates must be positive");
    expect([](TrainConfig& c) { c.min_lr = c.base_lr * 2; }, "min_lr must not exceed base_lr");
    expect([](TrainConfig& c) { c.total_steps = 0; }, "total_steps must be positive");
    expect([](TrainConfig& c) { c.warmup_steps = -1; }, "warmup_steps must be non-negative");
    expect([](TrainConfig& c) { c.warmup_steps = c.total_steps; },
           "warmup_steps must be smaller than total_steps");
    expect([](TrainConfig& c) { c.batch_size = 0; }, "batch_size must be positive");
    expect([](TrainConfig& c) { c.clip_norm = -1; }, "clip_norm must be non-negative");
    expect([](TrainConfig& c) { c.model.n_hops = 2; }, "reasoning valid only for odd hop counts");
    expect([](TrainConfig& c) { c.model.hidden = 7; }, "hidden width must be even");
}

TEST_CASE("one Adam update matches the closed form") {
    ParameterStore ps;
    Parameter& p = ps.create("w", 2, 2);
    p.value << 1.0, -2.0, 0.5, 3.0;
    const Matrix v0 = p.value;
    Matrix g(2, 2);
    g << 0.3, -0.7, 1.1, 0.0;
    p.grad = g;

    AdamOptimizer opt;
    const double lr = 0.01;
    const double norm = opt.step(ps, lr, 0.0);
    CHECK(norm == doctest::Approx(g.norm()).epsilon(1e-15));
    CHECK(opt.steps_taken() == 1);

    for (int i = 0; i < 4; ++i) {
        const double gi = g.data()[i];
        const double m_hat = (0.1 * gi) / (1.0 - 0.9);
        const double v_hat = (0.001 * gi * gi) / (1.0 - 0.999);
        const double want = v0.data()[i] - lr * m_hat / (std::sqrt(v_hat) + 1e-8);
        CHECK(p.value.data()[i] == doctest::Approx(want).epsilon(1e-14));
    }

    SUBCASE("a second step keeps separate first and second moments") {
        Matrix g2(2, 2);
        g2 << -0.2, 0.4, 0.9, 1.5;
        p.grad = g2;
        const Matrix v1 = p.value;
        opt.step(ps, lr, 0.0);
        for (int i = 0; i < 4; ++i) {
            const double m = 0.9 * (0.1 * g.data()[i]) + 0.1 * g2.data()[i];
            const double v =
                0.999 * (0.001 * g.data()[i] * g.data()[i]) + 0.001 * g2.data()[i] * g2.data()[i];
            const double want = v1.data()[i] - lr * (m / (1.0 - 0.9 * 0.9)) /
                                                   (std::sqrt(v / (1.0 - 0.999 * 0.999)) + 1e-8);
            CHECK(p.value.data()[i] == doctest::Approx(want).epsilon(1e-13));
        }
    }
}

TEST_CASE("gradient clipping rescales but reports the raw norm") {
    ParameterStore ps;
    Parameter& p = ps.create("w", 1, 2);
    p.value.setZero();
    p.grad << 6.0, 8.0;  // norm 10

    AdamOptimizer opt;
    const double norm = opt.step(ps, 0.01, 5.0);
    CHECK(norm == doctest::Approx(10.0).epsilon(1e-15));

    // the update must equal an unclipped run fed with the halved gradient
    ParameterStore ps2;
    Parameter& q = ps2.create("w", 1, 2);
    q.value.setZero();
    q.grad << 3.0, 4.0;
    AdamOptimizer opt2;
    opt2.step(ps2, 0.01, 0.0);
    CHECK(orc::max_abs_diff(p.value, q.value) == 0.0);
}

TEST_CASE("frozen columns receive no updates and accumulate no moments") {
    ParameterStore ps;
    Parameter& p = ps.create("embed", 2, 3);
    p.value << 1, 2, 3, 4, 5, 6;
    p.frozen_cols = {1};
    p.grad = Matrix::Ones(2, 3);

    AdamOptimizer opt;
    const double norm = opt.step(ps, 0.01, 0.0);
    CHECK(norm == doctest::Approx(2.0).epsilon(1e-15));  // 4 live unit entries
    CHECK(p.value(0, 1) == 2.0);
    CHECK(p.value(1, 1) == 5.0);
    CHECK(p.adam_m.col(1).cwiseAbs().maxCoeff() == 0.0);
    CHECK(p.adam_v.col(1).cwiseAbs().maxCoeff() == 0.0);
    CHECK(p.value(0, 0) != 1.0);
}

TEST_CASE("same seed and config reproduce the loss trajectory bit for bit") {
    const Corpus corpus = orc::tiny_corpus(6, 2, 3, 4, 77).corpus;
    TrainConfig cfg = small_train(10, 2, 4);

    Model a(cfg.model, corpus.vocab.size(), corpus.feature_dim(), 5);
    Model b(cfg.model, corpus.vocab.size(), corpus.feature_dim(), 5);
    const TrainResult ra = train(a, corpus, cfg);
    const TrainResult rb = train(b, corpus, cfg);

    REQUIRE(ra.log.size() == 10);
    REQUIRE(rb.log.size() == 10);
    for (std::size_t i = 0; i < ra.log.size(); ++i) {
        CHECK(ra.log[i].step == static_cast<int>(i) + 1);
        CHECK(ra.log[i].loss == rb.log[i].loss);
        CHECK(ra.log[i].lr == rb.log[i].lr);
    }

    // the trained parameters themselves must agree bitwise
    auto pa = a.params().all();
    auto pb = b.params().all();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i)
        CHECK(orc::max_abs_diff(pa[i]->value, pb[i]->value) == 0.0);
}

TEST_CASE("a few full-batch steps reduce the loss") {
    const Corpus corpus = orc::tiny_corpus(4, 2, 3, 4, 78).corpus;
    TrainConfig cfg = small_train(12, 3);
    Model model(cfg.model, corpus.vocab.size(), corpus.feature_dim(), 6);
    const TrainResult r = train(model, corpus, cfg);
    CHECK(r.log.back().loss < r.log.front().loss);
    for (const auto& e : r.log) CHECK(std::isfinite(e.loss));
}

TEST_CASE("the training log file is newline-delimited JSON mirroring the result") {
    const Corpus corpus = orc::tiny_corpus(3, 1, 3, 4, 79).corpus;
    TrainConfig cfg = small_train(4, 1, 2);
    Model model(cfg.model, corpus.vocab.size(), corpus.feature_dim(), 6);

    const fs::path log_path = scratch_dir() / "train_log.ndjson";
    TrainOptions opts;
    opts.log_path = log_path.string();
    const TrainResult r = train(model, corpus, cfg, opts);

    std::ifstream in(log_path);
    REQUIRE(in.good());
    std::string line;
    std::size_t i = 0;
    while (std::getline(in, line)) {
        REQUIRE(i < r.log.size());
        const auto j = nlohmann::json::parse(line);
        CHECK(j.at("step").get<int>() == r.log[i].step);
        CHECK(j.at("loss").get<double>() == r.log[i].loss);
        CHECK(j.at("lr").get<double>() == r.log[i].lr);
        ++i;
    }
    CHECK(i == r.log.size());
}

TEST_CASE("a poisoned parameter fails fast with the offending dialogs") {
    const Corpus corpus = orc::tiny_corpus(3, 1, 3, 4, 80).corpus;
    TrainConfig cfg = small_train(4, 1);
    Model model(cfg.model, corpus.vocab.size(), corpus.feature_dim(), 6);
    // the head is past the reasoning module's finite-input guards, so the NaN
    // reaches the loss itself
    model.params().get("dec.head.b2").value(1, 0) = std::numeric_limits<double>::quiet_NaN();

    try {
        train(model, corpus, cfg);
        FAIL("expected a non-finite loss error");
    } catch (const Error& e) {
        const std::string msg = e.what();
        CHECK(msg.rfind("non-finite loss at step 1 on dialogs [", 0) == 0);
        CHECK(msg.find("synth_") != std::string::npos);
        CHECK(msg.back() == ']');
    }
}

TEST_CASE("analytic gradients agree with central differences") {
    const Corpus corpus = orc::tiny_corpus(3, 2, 3, 4, 81).corpus;
    ModelConfig mc = small_model();
    Model model(mc, corpus.vocab.size(), corpus.feature_dim(), 9);

    const GradCheckReport report = gradient_check(model, corpus, 1e-5, 2, 3);
    CHECK(report.worst < 1e-4);
    CHECK(report.groups.size() == model.params().all().size());
    for (const auto& g : report.groups) {
        CAPTURE(g.name);
        CHECK(g.max_err < 1e-4);
    }

    SUBCASE("a corrupted gradient is caught as a large error") {
        const GradCheckReport bad = gradient_check(model, corpus, 1e-5, 2, 3, "dec.head.w2");
        double offending = 0.0;
        for (const auto& g : bad.groups)
            if (g.name == "dec.head.w2") offending = g.max_err;
        CHECK(offending > 1e-2);
    }

    SUBCASE("naming an unknown parameter is an error") {
        CHECK_THROWS_WITH_AS(gradient_check(model, corpus, 1e-5, 2, 3, "nope"),
                             "unknown parameter: nope", Error);
    }
}

TEST_CASE("checkpoints round-trip the model bit for bit") {
    const Corpus corpus = orc::tiny_corpus(3, 2, 3, 4, 82).corpus;
    ModelConfig mc = small_model();
    Model model(mc, corpus.vocab.size(), corpus.feature_dim(), 10);
    const std::uint64_t fp = corpus.vocab.fingerprint();

    const fs::path path = scratch_dir() / "model.ckpt";
    save_checkpoint(path.string(), model, fp, 42);

    LoadedCheckpoint loaded = load_checkpoint(path.string(), fp);
    CHECK(loaded.step == 42);
    CHECK(loaded.vocab_fingerprint == fp);
    CHECK(loaded.model->config() == mc);
    CHECK(loaded.model->vocab_size() == corpus.vocab.size());
    CHECK(loaded.model->feat_dim() == corpus.feature_dim());

    auto orig = model.params().all();
    auto got = loaded.model->params().all();
    REQUIRE(orig.size() == got.size());
    for (std::size_t i = 0; i < orig.size(); ++i) {
        CHECK(orig[i]->name == got[i]->name);
        CHECK(orig[i]->value.rows() == got[i]->value.rows());
        CHECK(orig[i]->value.cols() == got[i]->value.cols());
        CHECK(orc::max_abs_diff(orig[i]->value, got[i]->value) == 0.0);
    }

    SUBCASE("loading verifies the vocabulary pairing") {
        CHECK_NOTHROW(load_checkpoint(path.string(), 0));  // 0 skips the check
        CHECK_THROWS_WITH_AS(load_checkpoint(path.string(), fp + 1),
                             "vocab fingerprint mismatch between checkpoint and corpus", Error);
    }

    SUBCASE("non-checkpoint files are refused") {
        const fs::path junk = scratch_dir() / "junk.ckpt";
        std::ofstream(junk) << "definitely not binary weights";
        CHECK_THROWS_AS(load_checkpoint(junk.string()), Error);
    }

    SUBCASE("training writes periodic and final checkpoints") {
        TrainConfig cfg = small_train(5, 1, 2);
        cfg.model = mc;
        Model m2(mc, corpus.vocab.size(), corpus.feature_dim(), 10);
        const fs::path ckpt = scratch_dir() / "periodic.ckpt";
        TrainOptions opts;
        opts.checkpoint_path = ckpt.string();
        opts.checkpoint_every = 2;
        opts.vocab_fingerprint = fp;
        train(m2, corpus, cfg, opts);
        LoadedCheckpoint final_ckpt = load_checkpoint(ckpt.string(), fp);
        CHECK(final_ckpt.step == 5);
        auto after = m2.params().all();
        auto reread = final_ckpt.model->params().all();
        for (std::size_t i = 0; i < after.size(); ++i)
            CHECK(orc::max_abs_diff(after[i]->value, reread[i]->value) == 0.0);
    }
}
