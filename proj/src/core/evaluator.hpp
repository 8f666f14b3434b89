#pragma once

#include <map>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "model.hpp"
#include "trainer.hpp"

namespace dmrm {

struct MetricsReport {
    double mrr = 0.0;
    double r_at_1 = 0.0;
    double r_at_5 = 0.0;
    double r_at_10 = 0.0;
    double mean_rank = 0.0;
    int num_questions = 0;
};

// 1-based rank of the ground-truth candidate; ties are broken by original
// candidate index (equal scores at a lower index outrank the ground truth).
int rank_of_gt(const std::vector<double>& scores, int gt_index);

MetricsReport compute_metrics(const std::vector<int>& ranks);

struct ScoreRecord {
    std::string dialog;
    int round = 0;
    int gt_rank = 0;
    std::vector<double> scores;
    std::string slice;
};

struct EvalReport {
    MetricsReport overall;
    std::map<std::string, MetricsReport> slices;  // present only for tagged rounds
    std::vector<ScoreRecord> records;
};

// Ranks every round's candidate list by summed log-likelihood under the
// model. Ground-truth history is used at every round.
EvalReport evaluate_corpus(Model& model, const Corpus& corpus);

// Newline-delimited JSON, one record per question.
void write_score_records(const std::vector<ScoreRecord>& records, const std::string& path);
std::vector<ScoreRecord> read_score_records(const std::string& path);

// Fraction of teacher-forced answer positions (EOS included) where the
// argmax of the decoder logits equals the target token.
double token_accuracy(Model& model, const Corpus& corpus);

// Fraction of rounds whose greedy decode reproduces the reference answer
// exactly.
double greedy_match_rate(Model& model, const Corpus& corpus, int max_len = 9);

// ---- ablation harness ----

struct AblationRow {
    std::string variant;
    bool rejected = false;
    std::string error;  // set when rejected
    MetricsReport overall;
    std::map<std::string, MetricsReport> slices;
};

// Applies a named variant to a base configuration. Multi-hop variants build
// on the attention-free decoder; "hops-2" yields a config that fails
// validation, which run_ablation surfaces as a rejected row.
TrainConfig ablation_config(const TrainConfig& base, const std::string& variant);

std::vector<AblationRow> run_ablation(const Corpus& train_corpus, const Corpus& val_corpus,
                                      const TrainConfig& base,
                                      const std::vector<std::string>& variants);

}  // namespace dmrm
