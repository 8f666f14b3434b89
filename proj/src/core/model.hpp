#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ad.hpp"
#include "corpus.hpp"
#include "decoder.hpp"
#include "encoder.hpp"
#include "params.hpp"
#include "reasoning.hpp"

namespace dmrm {

struct ModelConfig {
    int embed_dim = 32;  // E; also the fused width feeding the decoder
    int hidden = 32;     // D, must be even
    int d_track = 32;
    int d_locate = 32;
    int n_hops = 3;
    bool no_track = false;
    bool no_locate = false;
    bool no_attd = false;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

// Full dialog model: shared-embedding encoders, dual-channel reasoning and the
// generative decoder, owning one parameter store. Parameter creation order is
// fixed (encoder, reasoning, decoder) so identical (config, vocab, seed)
// triples produce bit-identical initial weights.
class Model {
public:
    Model(const ModelConfig& cfg, int vocab_size, int feat_dim, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    int vocab_size() const { return vocab_size_; }
    int feat_dim() const { return feat_dim_; }
    ParameterStore& params() { return params_; }
    const ParameterStore& params() const { return params_; }
    EncoderModule& encoder() { return encoder_; }
    const ReasoningModule& reasoning() const { return reasoning_; }
    const DecoderModule& decoder() const { return decoder_; }

    // Image features and history columns encoded once per dialog; rounds
    // reuse the columns through concatenation, so one tape can carry every
    // round of the dialog.
    struct DialogGraph {
        Var v = nullptr;              // V x K, one column per object
        std::vector<Var> hist_cols;   // D x 1 each: caption, then one per round
    };
    DialogGraph begin_dialog(Tape& t, const DialogInstance& dialog,
                             const ImageFeatures& feats) const;

    struct RoundForward {
        Var fused = nullptr;
        DecoderContext ctx;
        DecoderState init;
    };
    // Encodes round `round`'s question, runs reasoning over the history up to
    // that round, fuses, and prepares the decoder start state.
    RoundForward round_forward(Tape& t, const DialogGraph& graph, const DialogInstance& dialog,
                               int round, ReasoningTrace* trace = nullptr) const;

    // Teacher-forced negative log-likelihood of the round's answer (EOS
    // appended), normalized per contributing token.
    Var round_nll(Tape& t, const RoundForward& fw, const std::vector<int>& answer_ids,
                  ReasoningTrace* trace = nullptr) const;

    double score_candidate(Tape& t, const RoundForward& fw,
                           const std::vector<int>& candidate_ids) const;

    std::vector<int> greedy_answer(Tape& t, const RoundForward& fw, int max_len) const;

    static std::vector<int> answer_target(const std::vector<int>& answer_ids);

private:
    ModelConfig cfg_;
    int vocab_size_;
    int feat_dim_;
    ParameterStore params_;
    Rng init_rng_;
    EncoderModule encoder_;
    ReasoningModule reasoning_;
    DecoderModule decoder_;
};

}  // namespace dmrm
