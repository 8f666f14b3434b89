#include "evaluator.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace dmrm {

using ordered_json = nlohmann::ordered_json;

int rank_of_gt(const std::vector<double>& scores, int gt_index) {
    require(gt_index >= 0 && gt_index < static_cast<int>(scores.size()),
            "gt index out of range");
    const double gt = scores[gt_index];
    require(std::isfinite(gt), "non-finite score");
    int rank = 1;
    for (int i = 0; i < static_cast<int>(scores.size()); ++i) {
        require(std::isfinite(scores[i]), "non-finite score");
        if (scores[i] > gt || (scores[i] == gt && i < gt_index)) ++rank;
    }
    return rank;
}

MetricsReport compute_metrics(const std::vector<int>& ranks) {
    require(!ranks.empty(), "empty rank list");
    MetricsReport m;
    m.num_questions = static_cast<int>(ranks.size());
    for (int r : ranks) {
        require(r >= 1, "rank must be at least 1");
        m.mrr += 1.0 / r;
        m.r_at_1 += r <= 1 ? 1.0 : 0.0;
        m.r_at_5 += r <= 5 ? 1.0 : 0.0;
        m.r_at_10 += r <= 10 ? 1.0 : 0.0;
        m.mean_rank += r;
    }
    const double n = m.num_questions;
    m.mrr /= n;
    m.r_at_1 /= n;
    m.r_at_5 /= n;
    m.r_at_10 /= n;
    m.mean_rank /= n;
    return m;
}

EvalReport evaluate_corpus(Model& model, const Corpus& corpus) {
    EvalReport report;
    std::vector<int> all_ranks;
    std::map<std::string, std::vector<int>> slice_ranks;

    for (const DialogInstance& d : corpus.dialogs) {
        Tape t(false);
        Model::DialogGraph g = model.begin_dialog(t, d, corpus.features_for(d.image_id));
        for (int r = 0; r < static_cast<int>(d.rounds.size()); ++r) {
            const DialogRound& round = d.rounds[r];
            require(!round.candidate_ids.empty(), "missing candidates in dialog " + d.image_id +
                                                      " round " + std::to_string(r));
            Model::RoundForward fw = model.round_forward(t, g, d, r);
            ScoreRecord rec;
            rec.dialog = d.image_id;
            rec.round = r;
            rec.slice = round.slice;
            rec.scores.reserve(round.candidate_ids.size());
            for (const std::vector<int>& cand : round.candidate_ids)
                rec.scores.push_back(model.score_candidate(t, fw, cand));
            rec.gt_rank = rank_of_gt(rec.scores, round.gt_index);
            all_ranks.push_back(rec.gt_rank);
            if (!round.slice.empty()) slice_ranks[round.slice].push_back(rec.gt_rank);
            report.records.push_back(std::move(rec));
        }
    }

    report.overall = compute_metrics(all_ranks);
    for (const auto& [name, ranks] : slice_ranks)
        report.slices.emplace(name, compute_metrics(ranks));
    return report;
}

void write_score_records(const std::vector<ScoreRecord>& records, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    require(os.good(), "cannot open score file: " + path);
    for (const ScoreRecord& r : records) {
        ordered_json j;
        j["dialog"] = r.dialog;
        j["round"] = r.round;
        j["gt_rank"] = r.gt_rank;
        j["scores"] = r.scores;
        if (!r.slice.empty()) j["slice"] = r.slice;
        os << j.dump() << "\n";
    }
    require(os.good(), "failed writing score file: " + path);
}

std::vector<ScoreRecord> read_score_records(const std::string& path) {
    std::ifstream is(path);
    require(is.good(), "cannot open score file: " + path);
    std::vector<ScoreRecord> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const ordered_json j = ordered_json::parse(line);
        ScoreRecord r;
        r.dialog = j.at("dialog").get<std::string>();
        r.round = j.at("round").get<int>();
        r.gt_rank = j.at("gt_rank").get<int>();
        r.scores = j.at("scores").get<std::vector<double>>();
        if (j.contains("slice")) r.slice = j.at("slice").get<std::string>();
        out.push_back(std::move(r));
    }
    return out;
}

double token_accuracy(Model& model, const Corpus& corpus) {
    long hits = 0, total = 0;
    for (const DialogInstance& d : corpus.dialogs) {
        Tape t(false);
        Model::DialogGraph g = model.begin_dialog(t, d, corpus.features_for(d.image_id));
        for (int r = 0; r < static_cast<int>(d.rounds.size()); ++r) {
            Model::RoundForward fw = model.round_forward(t, g, d, r);
            const std::vector<int> target = Model::answer_target(d.rounds[r].answer_ids);
            DecoderState state = fw.init;
            for (std::size_t i = 0; i < target.size(); ++i) {
                const int prev = i == 0 ? Vocabulary::kBos : target[i - 1];
                DecoderModule::StepOut so = model.decoder().decode_step(t, state, prev, fw.ctx);
                state = so.state;
                const Matrix& logits = so.logits->value;
                int best = 0;
                for (int row = 1; row < logits.rows(); ++row)
                    if (logits(row, 0) > logits(best, 0)) best = row;
                hits += best == target[i] ? 1 : 0;
                ++total;
            }
        }
    }
    require(total > 0, "empty evaluation corpus");
    return static_cast<double>(hits) / static_cast<double>(total);
}

double greedy_match_rate(Model& model, const Corpus& corpus, int max_len) {
    long hits = 0, total = 0;
    for (const DialogInstance& d : corpus.dialogs) {
        Tape t(false);
        Model::DialogGraph g = model.begin_dialog(t, d, corpus.features_for(d.image_id));
        for (int r = 0; r < static_cast<int>(d.rounds.size()); ++r) {
            Model::RoundForward fw = model.round_forward(t, g, d, r);
            hits += model.greedy_answer(t, fw, max_len) == d.rounds[r].answer_ids ? 1 : 0;
            ++total;
        }
    }
    require(total > 0, "empty evaluation corpus");
    return static_cast<double>(hits) / static_cast<double>(total);
}

TrainConfig ablation_config(const TrainConfig& base, const std::string& variant) {
    TrainConfig cfg = base;
    cfg.model.no_track = false;
    cfg.model.no_locate = false;
    cfg.model.no_attd = false;
    if (variant == "full") {
    } else if (variant == "no-track") {
        cfg.model.no_track = true;
    } else if (variant == "no-locate") {
        cfg.model.no_locate = true;
    } else if (variant == "no-attd") {
        cfg.model.no_attd = true;
    } else if (variant == "hops-1" || variant == "hops-2" || variant == "hops-3") {
        cfg.model.no_attd = true;
        cfg.model.n_hops = variant.back() - '0';
    } else {
        fail("unknown ablation variant: " + variant);
    }
    return cfg;
}

std::vector<AblationRow> run_ablation(const Corpus& train_corpus, const Corpus& val_corpus,
                                      const TrainConfig& base,
                                      const std::vector<std::string>& variants) {
    std::vector<AblationRow> rows;
    for (const std::string& variant : variants) {
        AblationRow row;
        row.variant = variant;
        TrainConfig cfg = ablation_config(base, variant);
        try {
            cfg.validate();
        } catch (const Error& e) {
            row.rejected = true;
            row.error = e.what();
            rows.push_back(std::move(row));
            continue;
        }
        Model model(cfg.model, train_corpus.vocab.size(), train_corpus.feature_dim(), cfg.seed);
        train(model, train_corpus, cfg);
        EvalReport report = evaluate_corpus(model, val_corpus);
        row.overall = report.overall;
        row.slices = std::move(report.slices);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace dmrm
