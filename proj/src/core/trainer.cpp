#include "trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace dmrm {

using ordered_json = nlohmann::ordered_json;

void TrainConfig::validate() const {
    require(base_lr > 0.0 && min_lr > 0.0, "learning rates must be positive");
    require(min_lr <= base_lr, "min_lr must not exceed base_lr");
    require(total_steps >= 1, "total_steps must be positive");
    require(warmup_steps >= 0, "warmup_steps must be non-negative");
    require(warmup_steps < total_steps, "warmup_steps must be smaller than total_steps");
    require(batch_size >= 1, "batch_size must be positive");
    require(clip_norm >= 0.0, "clip_norm must be non-negative");
    model.validate();
}

double lr_schedule(const TrainConfig& cfg, int step) {
    require(step >= 0, "step must be non-negative");
    if (step >= cfg.total_steps) return cfg.min_lr;
    const double span = cfg.base_lr - cfg.min_lr;
    if (step <= cfg.warmup_steps) {
        if (cfg.warmup_steps == 0) return cfg.base_lr;
        return cfg.min_lr + span * static_cast<double>(step) / cfg.warmup_steps;
    }
    const double frac = static_cast<double>(step - cfg.warmup_steps) /
                        (cfg.total_steps - cfg.warmup_steps);
    return cfg.base_lr - span * frac;
}

double AdamOptimizer::step(ParameterStore& ps, double lr, double clip_norm) {
    double sq = 0.0;
    for (Parameter* p : ps.all()) {
        for (int c : p->frozen_cols) p->grad.col(c).setZero();
        sq += p->grad.squaredNorm();
    }
    const double norm = std::sqrt(sq);
    const double scale = (clip_norm > 0.0 && norm > clip_norm) ? clip_norm / norm : 1.0;
    ++t_;
    const double corr1 = 1.0 - std::pow(beta1_, t_);
    const double corr2 = 1.0 - std::pow(beta2_, t_);
    for (Parameter* p : ps.all()) {
        if (scale != 1.0) p->grad *= scale;
        p->adam_m = beta1_ * p->adam_m + (1.0 - beta1_) * p->grad;
        p->adam_v.array() =
            beta2_ * p->adam_v.array() + (1.0 - beta2_) * p->grad.array().square();
        p->value.array() -=
            lr * (p->adam_m.array() / corr1) / ((p->adam_v.array() / corr2).sqrt() + eps_);
    }
    return norm;
}

namespace {

Var mean_of(Tape& t, const std::vector<Var>& xs) {
    require(!xs.empty(), "mean of empty loss list");
    Var s = xs[0];
    for (std::size_t i = 1; i < xs.size(); ++i) s = ad::add(t, s, xs[i]);
    return ad::scale(t, s, 1.0 / static_cast<double>(xs.size()));
}

Var dialog_loss(Tape& t, Model& model, const Corpus& corpus, int dialog_index) {
    const DialogInstance& d = corpus.dialogs[dialog_index];
    Model::DialogGraph g = model.begin_dialog(t, d, corpus.features_for(d.image_id));
    std::vector<Var> rounds;
    rounds.reserve(d.rounds.size());
    for (int r = 0; r < static_cast<int>(d.rounds.size()); ++r) {
        Model::RoundForward fw = model.round_forward(t, g, d, r);
        rounds.push_back(model.round_nll(t, fw, d.rounds[r].answer_ids));
    }
    return mean_of(t, rounds);
}

Var batch_loss(Tape& t, Model& model, const Corpus& corpus, const std::vector<int>& batch) {
    std::vector<Var> per_dialog;
    per_dialog.reserve(batch.size());
    for (int idx : batch) per_dialog.push_back(dialog_loss(t, model, corpus, idx));
    return mean_of(t, per_dialog);
}

}  // namespace

TrainResult train(Model& model, const Corpus& corpus, const TrainConfig& cfg,
                  const TrainOptions& opts) {
    cfg.validate();
    require(!corpus.dialogs.empty(), "empty training corpus");

    std::ofstream log_file;
    if (!opts.log_path.empty()) {
        log_file.open(opts.log_path, std::ios::trunc);
        require(log_file.good(), "cannot open training log: " + opts.log_path);
    }

    Rng rng(cfg.seed);
    const int n = static_cast<int>(corpus.dialogs.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    int cursor = n;  // forces a shuffle before the first batch

    AdamOptimizer opt;
    TrainResult result;
    result.log.reserve(cfg.total_steps);

    for (int step = 1; step <= cfg.total_steps; ++step) {
        if (cursor >= n) {
            rng.shuffle(order);
            cursor = 0;
        }
        const int take = std::min(cfg.batch_size, n - cursor);
        std::vector<int> batch(order.begin() + cursor, order.begin() + cursor + take);
        cursor += take;

        Tape t(true);
        Var loss = batch_loss(t, model, corpus, batch);
        const double loss_value = loss->value(0, 0);
        if (!std::isfinite(loss_value)) {
            std::ostringstream os;
            os << "non-finite loss at step " << step << " on dialogs [";
            for (std::size_t i = 0; i < batch.size(); ++i) {
                if (i) os << ", ";
                os << corpus.dialogs[batch[i]].image_id;
            }
            os << "]";
            fail(os.str());
        }

        model.params().zero_grads();
        t.backward(loss);
        const double lr = lr_schedule(cfg, step);
        opt.step(model.params(), lr, cfg.clip_norm);

        result.log.push_back({step, loss_value, lr});
        if (log_file.is_open()) {
            ordered_json line;
            line["step"] = step;
            line["loss"] = loss_value;
            line["lr"] = lr;
            log_file << line.dump() << "\n";
        }
        if (!opts.checkpoint_path.empty() && opts.checkpoint_every > 0 &&
            step % opts.checkpoint_every == 0 && step != cfg.total_steps) {
            save_checkpoint(opts.checkpoint_path, model, opts.vocab_fingerprint, step);
        }
    }

    if (!opts.checkpoint_path.empty())
        save_checkpoint(opts.checkpoint_path, model, opts.vocab_fingerprint, cfg.total_steps);
    return result;
}

GradCheckReport gradient_check(Model& model, const Corpus& corpus, double epsilon,
                               int max_dialogs, int samples_per_param,
                               const std::string& corrupt) {
    require(!corpus.dialogs.empty(), "empty training corpus");
    const int use = std::min<int>(max_dialogs, static_cast<int>(corpus.dialogs.size()));
    std::vector<int> batch(use);
    std::iota(batch.begin(), batch.end(), 0);

    auto loss_value = [&]() {
        Tape t(false);
        return batch_loss(t, model, corpus, batch)->value(0, 0);
    };

    {
        Tape t(true);
        Var loss = batch_loss(t, model, corpus, batch);
        model.params().zero_grads();
        t.backward(loss);
    }

    std::vector<Matrix> analytic;
    std::vector<Parameter*> params = model.params().all();
    analytic.reserve(params.size());
    bool corrupted = corrupt.empty();
    for (Parameter* p : params) {
        Matrix g = p->grad;
        if (!corrupt.empty() && p->name == corrupt) {
            g = 1.5 * g;
            g.array() += 0.01;
            corrupted = true;
        }
        analytic.push_back(std::move(g));
    }
    require(corrupted, "unknown parameter: " + corrupt);

    GradCheckReport report;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Parameter* p = params[pi];
        const long total = p->value.size();
        const int probes = static_cast<int>(std::min<long>(samples_per_param, total));
        GradCheckGroup group{p->name, 0.0};
        for (int k = 0; k < probes; ++k) {
            const long at = probes == 1 ? 0 : k * (total - 1) / (probes - 1);
            double* slot = p->value.data() + at;
            const double saved = *slot;
            *slot = saved + epsilon;
            const double up = loss_value();
            *slot = saved - epsilon;
            const double down = loss_value();
            *slot = saved;
            const double numeric = (up - down) / (2.0 * epsilon);
            const double exact = analytic[pi].data()[at];
            const double denom = std::max(std::abs(exact), std::abs(numeric));
            const double err = denom < 1e-6 ? std::abs(exact - numeric)
                                            : std::abs(exact - numeric) / denom;
            group.max_err = std::max(group.max_err, err);
        }
        report.worst = std::max(report.worst, group.max_err);
        report.groups.push_back(std::move(group));
    }
    return report;
}

// ---- checkpoint container ----

namespace {

constexpr char kCkptMagic[8] = {'D', 'M', 'R', 'M', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCkptVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t take_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    require(is.good(), "truncated checkpoint file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

ordered_json config_to_json(const ModelConfig& c) {
    ordered_json j;
    j["embed_dim"] = c.embed_dim;
    j["hidden"] = c.hidden;
    j["d_track"] = c.d_track;
    j["d_locate"] = c.d_locate;
    j["n_hops"] = c.n_hops;
    j["no_track"] = c.no_track;
    j["no_locate"] = c.no_locate;
    j["no_attd"] = c.no_attd;
    return j;
}

ModelConfig config_from_json(const ordered_json& j) {
    ModelConfig c;
    c.embed_dim = j.at("embed_dim").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.d_track = j.at("d_track").get<int>();
    c.d_locate = j.at("d_locate").get<int>();
    c.n_hops = j.at("n_hops").get<int>();
    c.no_track = j.at("no_track").get<bool>();
    c.no_locate = j.at("no_locate").get<bool>();
    c.no_attd = j.at("no_attd").get<bool>();
    return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model,
                     std::uint64_t vocab_fingerprint, int step) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    require(os.good(), "cannot open checkpoint file: " + path);
    os.write(kCkptMagic, 8);
    put_u32(os, kCkptVersion);

    ordered_json manifest;
    manifest["format"] = kCkptVersion;
    manifest["config"] = config_to_json(model.config());
    manifest["vocab_fingerprint"] = std::to_string(vocab_fingerprint);
    manifest["vocab_size"] = model.vocab_size();
    manifest["feat_dim"] = model.feat_dim();
    manifest["step"] = step;
    const std::string mtext = manifest.dump();
    put_u32(os, static_cast<std::uint32_t>(mtext.size()));
    os.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));

    const auto params = model.params().all();
    put_u32(os, static_cast<std::uint32_t>(params.size()));
    for (const Parameter* p : params) {
        put_u32(os, static_cast<std::uint32_t>(p->name.size()));
        os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        put_u32(os, static_cast<std::uint32_t>(p->value.rows()));
        put_u32(os, static_cast<std::uint32_t>(p->value.cols()));
        os.write(reinterpret_cast<const char*>(p->value.data()),
                 static_cast<std::streamsize>(sizeof(double) * p->value.size()));
    }
    require(os.good(), "failed writing checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path,
                                 std::uint64_t expected_vocab_fingerprint) {
    std::ifstream is(path, std::ios::binary);
    require(is.good(), "cannot open checkpoint file: " + path);
    char magic[8];
    is.read(magic, 8);
    require(is.good() && std::memcmp(magic, kCkptMagic, 8) == 0, "not a checkpoint file: " + path);
    const std::uint32_t version = take_u32(is);
    require(version == kCkptVersion, "unsupported checkpoint version");

    const std::uint32_t mlen = take_u32(is);
    std::string mtext(mlen, '\0');
    is.read(mtext.data(), mlen);
    require(is.good(), "truncated checkpoint file");
    const ordered_json manifest = ordered_json::parse(mtext);

    LoadedCheckpoint out;
    out.vocab_fingerprint = std::stoull(manifest.at("vocab_fingerprint").get<std::string>());
    out.step = manifest.at("step").get<int>();
    if (expected_vocab_fingerprint != 0)
        require(out.vocab_fingerprint == expected_vocab_fingerprint,
                "vocab fingerprint mismatch between checkpoint and corpus");

    const ModelConfig cfg = config_from_json(manifest.at("config"));
    out.model = std::make_unique<Model>(cfg, manifest.at("vocab_size").get<int>(),
                                        manifest.at("feat_dim").get<int>(), 0);

    const std::uint32_t count = take_u32(is);
    require(count == out.model->params().size(), "checkpoint parameter count mismatch");
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t nlen = take_u32(is);
        std::string name(nlen, '\0');
        is.read(name.data(), nlen);
        require(is.good(), "truncated checkpoint file");
        const std::uint32_t rows = take_u32(is);
        const std::uint32_t cols = take_u32(is);
        require(out.model->params().has(name), "checkpoint parameter mismatch: " + name);
        Parameter& p = out.model->params().get(name);
        require(p.value.rows() == static_cast<long>(rows) &&
                    p.value.cols() == static_cast<long>(cols),
                "checkpoint parameter mismatch: " + name);
        is.read(reinterpret_cast<char*>(p.value.data()),
                static_cast<std::streamsize>(sizeof(double) * p.value.size()));
        require(is.good(), "truncated checkpoint file");
    }
    return out;
}

}  // namespace dmrm
