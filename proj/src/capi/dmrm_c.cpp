#include "dmrm/dmrm.h"

#include <cstring>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "../core/corpus.hpp"
#include "../core/evaluator.hpp"
#include "../core/model.hpp"
#include "../core/stats.hpp"
#include "../core/trace.hpp"
#include "../core/trainer.hpp"

using ordered_json = nlohmann::ordered_json;

struct dmrm_corpus {
    dmrm::Corpus corpus;
};

struct dmrm_model {
    std::unique_ptr<dmrm::Model> model;
    uint64_t vocab_fingerprint = 0;
    int step = 0;
};

namespace {

thread_local std::string g_last_error;

dmrm_status set_error(dmrm_status code, const std::string& message) {
    g_last_error = message;
    return code;
}

dmrm_status invalid(const std::string& message) {
    return set_error(DMRM_INVALID_ARGUMENT, message);
}

template <typename Fn>
dmrm_status wrap(Fn&& fn) {
    try {
        fn();
        return DMRM_OK;
    } catch (const std::exception& e) {
        return set_error(DMRM_ERROR, e.what());
    } catch (...) {
        return set_error(DMRM_ERROR, "unknown error");
    }
}

char* dup_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

dmrm::ModelConfig to_model_config(const dmrm_model_config& c) {
    dmrm::ModelConfig m;
    m.embed_dim = c.embed_dim;
    m.hidden = c.hidden;
    m.d_track = c.d_track;
    m.d_locate = c.d_locate;
    m.n_hops = c.n_hops;
    m.no_track = c.no_track != 0;
    m.no_locate = c.no_locate != 0;
    m.no_attd = c.no_attd != 0;
    return m;
}

dmrm::TrainConfig to_train_config(const dmrm_train_config& c) {
    dmrm::TrainConfig t;
    t.base_lr = c.base_lr;
    t.min_lr = c.min_lr;
    t.clip_norm = c.clip_norm;
    t.warmup_steps = c.warmup_steps;
    t.total_steps = c.total_steps;
    t.batch_size = c.batch_size;
    t.seed = c.seed;
    t.model = to_model_config(c.model);
    return t;
}

ordered_json metrics_json(const dmrm::MetricsReport& m) {
    ordered_json j;
    j["mrr"] = m.mrr;
    j["r_at_1"] = m.r_at_1;
    j["r_at_5"] = m.r_at_5;
    j["r_at_10"] = m.r_at_10;
    j["mean_rank"] = m.mean_rank;
    j["num_questions"] = m.num_questions;
    return j;
}

std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

extern "C" {

const char* dmrm_version(void) { return "0.1.0"; }

const char* dmrm_last_error(void) { return g_last_error.c_str(); }

void dmrm_string_free(char* s) { delete[] s; }

void dmrm_synth_config_init(dmrm_synth_config* cfg) {
    if (!cfg) return;
    dmrm::SynthConfig d;
    cfg->num_dialogs = d.num_dialogs;
    cfg->rounds_per_dialog = d.rounds_per_dialog;
    cfg->objects_per_image = d.objects_per_image;
    cfg->num_candidates = d.num_candidates;
    cfg->seed = d.seed;
}

dmrm_status dmrm_synth_write(const dmrm_synth_config* cfg, const char* out_dir) {
    if (!cfg || !out_dir) return invalid("null argument to dmrm_synth_write");
    return wrap([&] {
        dmrm::SynthConfig sc;
        sc.num_dialogs = cfg->num_dialogs;
        sc.rounds_per_dialog = cfg->rounds_per_dialog;
        sc.objects_per_image = cfg->objects_per_image;
        sc.num_candidates = cfg->num_candidates;
        sc.seed = cfg->seed;
        dmrm::SyntheticCorpus synth = dmrm::generate_synthetic_corpus(sc);
        dmrm::save_corpus(synth.corpus, out_dir);
    });
}

dmrm_status dmrm_build_vocab(const char* dataset_json, int32_t min_count,
                             const char* out_vocab) {
    if (!dataset_json || !out_vocab) return invalid("null argument to dmrm_build_vocab");
    return wrap([&] {
        dmrm::RawDataset raw = dmrm::read_dataset_json(dataset_json);
        std::vector<std::vector<std::string>> streams;
        for (const dmrm::RawDialog& d : raw.dialogs) {
            streams.push_back(dmrm::preprocess_text(d.caption));
            for (const dmrm::RawRound& r : d.rounds) {
                streams.push_back(dmrm::preprocess_text(r.question));
                streams.push_back(dmrm::preprocess_text(r.answer));
                for (const std::string& c : r.candidates)
                    streams.push_back(dmrm::preprocess_text(c));
            }
        }
        dmrm::Vocabulary vocab = dmrm::build_vocabulary(streams, min_count);
        vocab.save(out_vocab);
    });
}

dmrm_status dmrm_corpus_open(const char* dataset_json, const char* features_dir,
                             const char* vocab_path, const char* split, dmrm_corpus** out) {
    if (!dataset_json || !features_dir || !vocab_path || !split || !out)
        return invalid("null argument to dmrm_corpus_open");
    return wrap([&] {
        dmrm::Vocabulary vocab = dmrm::Vocabulary::load(vocab_path);
        auto handle = std::make_unique<dmrm_corpus>();
        handle->corpus = dmrm::load_corpus(dataset_json, features_dir, vocab, split);
        *out = handle.release();
    });
}

void dmrm_corpus_free(dmrm_corpus* c) { delete c; }

int32_t dmrm_corpus_dialogs(const dmrm_corpus* c) {
    return c ? static_cast<int32_t>(c->corpus.dialogs.size()) : 0;
}

int32_t dmrm_corpus_rounds(const dmrm_corpus* c) {
    return c ? static_cast<int32_t>(c->corpus.total_rounds()) : 0;
}

int32_t dmrm_corpus_vocab_size(const dmrm_corpus* c) {
    return c ? c->corpus.vocab.size() : 0;
}

uint64_t dmrm_corpus_vocab_fingerprint(const dmrm_corpus* c) {
    return c ? c->corpus.vocab.fingerprint() : 0;
}

void dmrm_model_config_init(dmrm_model_config* cfg) {
    if (!cfg) return;
    dmrm::ModelConfig d;
    cfg->embed_dim = d.embed_dim;
    cfg->hidden = d.hidden;
    cfg->d_track = d.d_track;
    cfg->d_locate = d.d_locate;
    cfg->n_hops = d.n_hops;
    cfg->no_track = d.no_track ? 1 : 0;
    cfg->no_locate = d.no_locate ? 1 : 0;
    cfg->no_attd = d.no_attd ? 1 : 0;
}

void dmrm_train_config_init(dmrm_train_config* cfg) {
    if (!cfg) return;
    dmrm::TrainConfig d;
    dmrm_model_config_init(&cfg->model);
    cfg->base_lr = d.base_lr;
    cfg->min_lr = d.min_lr;
    cfg->clip_norm = d.clip_norm;
    cfg->warmup_steps = d.warmup_steps;
    cfg->total_steps = d.total_steps;
    cfg->batch_size = d.batch_size;
    cfg->seed = d.seed;
}

dmrm_status dmrm_model_create(const dmrm_model_config* cfg, const dmrm_corpus* corpus,
                              uint64_t seed, dmrm_model** out) {
    if (!cfg || !corpus || !out) return invalid("null argument to dmrm_model_create");
    return wrap([&] {
        auto handle = std::make_unique<dmrm_model>();
        handle->model = std::make_unique<dmrm::Model>(
            to_model_config(*cfg), corpus->corpus.vocab.size(), corpus->corpus.feature_dim(),
            seed);
        handle->vocab_fingerprint = corpus->corpus.vocab.fingerprint();
        *out = handle.release();
    });
}

dmrm_status dmrm_model_load(const char* path, uint64_t expected_vocab_fingerprint,
                            dmrm_model** out) {
    if (!path || !out) return invalid("null argument to dmrm_model_load");
    return wrap([&] {
        dmrm::LoadedCheckpoint loaded = dmrm::load_checkpoint(path, expected_vocab_fingerprint);
        auto handle = std::make_unique<dmrm_model>();
        handle->model = std::move(loaded.model);
        handle->vocab_fingerprint = loaded.vocab_fingerprint;
        handle->step = loaded.step;
        *out = handle.release();
    });
}

dmrm_status dmrm_model_save(const dmrm_model* m, const char* path) {
    if (!m || !path) return invalid("null argument to dmrm_model_save");
    return wrap([&] { dmrm::save_checkpoint(path, *m->model, m->vocab_fingerprint, m->step); });
}

void dmrm_model_free(dmrm_model* m) { delete m; }

dmrm_status dmrm_train(dmrm_model* m, const dmrm_corpus* corpus, const dmrm_train_config* cfg,
                       const char* log_path, const char* checkpoint_path,
                       int32_t checkpoint_every) {
    if (!m || !corpus || !cfg) return invalid("null argument to dmrm_train");
    return wrap([&] {
        dmrm::TrainConfig tc = to_train_config(*cfg);
        dmrm::TrainOptions opts;
        if (log_path) opts.log_path = log_path;
        if (checkpoint_path) opts.checkpoint_path = checkpoint_path;
        opts.checkpoint_every = checkpoint_every;
        opts.vocab_fingerprint = m->vocab_fingerprint;
        dmrm::train(*m->model, corpus->corpus, tc, opts);
        m->step = tc.total_steps;
    });
}

dmrm_status dmrm_evaluate(dmrm_model* m, const dmrm_corpus* corpus, const char* scores_path,
                          char** report_json) {
    if (!m || !corpus || !report_json) return invalid("null argument to dmrm_evaluate");
    return wrap([&] {
        if (m->vocab_fingerprint != 0 &&
            m->vocab_fingerprint != corpus->corpus.vocab.fingerprint())
            dmrm::fail("vocab fingerprint mismatch between checkpoint and corpus");
        dmrm::EvalReport report = dmrm::evaluate_corpus(*m->model, corpus->corpus);
        if (scores_path) dmrm::write_score_records(report.records, scores_path);
        ordered_json j = metrics_json(report.overall);
        ordered_json slices = ordered_json::object();
        for (const auto& [name, metrics] : report.slices) slices[name] = metrics_json(metrics);
        j["slices"] = std::move(slices);
        *report_json = dup_string(j.dump(2));
    });
}

dmrm_status dmrm_ablate(const dmrm_corpus* train_corpus, const dmrm_corpus* val_corpus,
                        const dmrm_train_config* base, const char* variants_csv,
                        char** table_json) {
    if (!train_corpus || !val_corpus || !base || !variants_csv || !table_json)
        return invalid("null argument to dmrm_ablate");
    return wrap([&] {
        const std::vector<std::string> variants = split_csv(variants_csv);
        dmrm::require(!variants.empty(), "no ablation variants given");
        std::vector<dmrm::AblationRow> rows = dmrm::run_ablation(
            train_corpus->corpus, val_corpus->corpus, to_train_config(*base), variants);
        ordered_json table = ordered_json::array();
        for (const dmrm::AblationRow& row : rows) {
            ordered_json j;
            j["variant"] = row.variant;
            if (row.rejected) {
                j["error"] = row.error;
            } else {
                j.update(metrics_json(row.overall));
                ordered_json slices = ordered_json::object();
                for (const auto& [name, metrics] : row.slices)
                    slices[name] = metrics_json(metrics);
                j["slices"] = std::move(slices);
            }
            table.push_back(std::move(j));
        }
        *table_json = dup_string(table.dump(2));
    });
}

dmrm_status dmrm_trace(dmrm_model* m, const dmrm_corpus* corpus, int32_t dialog, int32_t round,
                       char** trace_json) {
    if (!m || !corpus || !trace_json) return invalid("null argument to dmrm_trace");
    return wrap([&] {
        const dmrm::Corpus& c = corpus->corpus;
        dmrm::require(dialog >= 0 && dialog < static_cast<int32_t>(c.dialogs.size()),
                      "dialog out of range");
        const dmrm::DialogInstance& d = c.dialogs[dialog];
        dmrm::require(round >= 0 && round < static_cast<int32_t>(d.rounds.size()),
                      "round out of range");
        dmrm::Model& model = *m->model;
        dmrm::Tape t(false);
        dmrm::ReasoningTrace trace;
        dmrm::Model::DialogGraph g = model.begin_dialog(t, d, c.features_for(d.image_id));
        dmrm::Model::RoundForward fw = model.round_forward(t, g, d, round, &trace);
        model.round_nll(t, fw, d.rounds[round].answer_ids, &trace);
        *trace_json = dup_string(dmrm::trace_to_json(trace));
    });
}

dmrm_status dmrm_trace_plots(const char* trace_json, const char* prefix, char** paths_json) {
    if (!trace_json || !prefix || !paths_json)
        return invalid("null argument to dmrm_trace_plots");
    return wrap([&] {
        dmrm::ReasoningTrace trace = dmrm::trace_from_json(trace_json);
        const std::vector<std::string> paths = dmrm::write_trace_plots(trace, prefix);
        ordered_json j = paths;
        *paths_json = dup_string(j.dump());
    });
}

dmrm_status dmrm_compare_scores(const char* scores_path_a, const char* scores_path_b,
                                char** result_json) {
    if (!scores_path_a || !scores_path_b || !result_json)
        return invalid("null argument to dmrm_compare_scores");
    return wrap([&] {
        const std::vector<dmrm::ScoreRecord> a = dmrm::read_score_records(scores_path_a);
        const std::vector<dmrm::ScoreRecord> b = dmrm::read_score_records(scores_path_b);
        dmrm::require(!a.empty(), "no score records in " + std::string(scores_path_a));
        std::map<std::pair<std::string, int>, double> rr_b;
        for (const dmrm::ScoreRecord& r : b) rr_b[{r.dialog, r.round}] = 1.0 / r.gt_rank;
        dmrm::require(a.size() == b.size(), "score files cover different question sets");
        std::vector<double> xs, ys;
        xs.reserve(a.size());
        ys.reserve(a.size());
        for (const dmrm::ScoreRecord& r : a) {
            auto it = rr_b.find({r.dialog, r.round});
            dmrm::require(it != rr_b.end(), "score files cover different question sets");
            xs.push_back(1.0 / r.gt_rank);
            ys.push_back(it->second);
        }
        dmrm::PairedTTest test = dmrm::paired_ttest(xs, ys);
        double mean_a = 0.0, mean_b = 0.0;
        for (double v : xs) mean_a += v;
        for (double v : ys) mean_b += v;
        mean_a /= static_cast<double>(xs.size());
        mean_b /= static_cast<double>(ys.size());
        ordered_json j;
        j["n"] = test.n;
        j["mean_rr_a"] = mean_a;
        j["mean_rr_b"] = mean_b;
        j["mean_diff"] = test.mean_diff;
        j["t_stat"] = test.t_stat;
        j["df"] = test.df;
        j["p_value"] = test.p_value;
        *result_json = dup_string(j.dump(2));
    });
}

}  // extern "C"
