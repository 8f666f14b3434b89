#pragma once

#include <string>
#include <vector>

#include "ad.hpp"
#include "corpus.hpp"
#include "nn.hpp"
#include "params.hpp"
#include "reasoning.hpp"

namespace dmrm {

// One attention head: logits over the columns of a source matrix, gated by
// the current decoder hidden state. No biases.
struct AttnTriple {
    Parameter* w_src = nullptr;   // d_att x src width
    Parameter* w_gate = nullptr;  // d_att x decoder hidden
    Parameter* w_out = nullptr;   // 1 x d_att

    static AttnTriple create(ParameterStore& ps, const std::string& prefix, int src_dim,
                             int hidden, int d_att, Rng& rng);
};

// Everything a decode step attends over. Null fused is only valid when the
// context-attention pathway is enabled; an empty q_mask means every token
// column is valid.
struct DecoderContext {
    Var q_tokens = nullptr;  // D x L
    Var u = nullptr;         // D x T
    Var v = nullptr;         // V x K
    Var fused = nullptr;     // fused encoder output, E x 1
    std::vector<bool> q_mask;
};

struct DecoderState {
    nn::LstmCell::State rec;
    int step = 0;
};

// Recurrent generative decoder. The recurrent cell consumes embedded answer
// tokens, so its input width equals the embedding width, which in turn pins
// the fused encoder output width. Each step attends over question tokens,
// history rounds and image objects; the three attended vectors are merged
// into a context vector feeding the vocabulary head together with the hidden
// state. With `no_attd` the context vector is replaced by the fused encoder
// output and no attention parameters exist.
class DecoderModule {
public:
    DecoderModule(ParameterStore& ps, Parameter& embedding, int hidden, int feat_dim,
                  int fused_dim, bool no_attd, Rng& rng);

    int hidden() const { return hidden_; }
    int vocab_size() const { return vocab_size_; }
    bool no_attd() const { return no_attd_; }

    // One recurrent step with the fused vector as input and the question
    // encoder's final (hidden, cell) as the initial state.
    DecoderState init_state(Tape& t, Var fused, Var q_final, Var q_final_cell) const;

    struct StepOut {
        DecoderState state;
        Var logits = nullptr;  // vocab x 1
    };
    StepOut decode_step(Tape& t, const DecoderState& state, int y_prev_id,
                        const DecoderContext& ctx,
                        std::vector<DecoderTraceStep>* trace = nullptr) const;

    struct NllResult {
        Var total = nullptr;  // 1x1, summed over non-PAD target positions
        std::vector<double> per_token_logprob;
    };
    // target_ids is the answer with EOS appended; inputs are BOS followed by
    // target_ids[:-1]. PAD targets contribute nothing.
    NllResult teacher_forced_nll(Tape& t, const DecoderState& init,
                                 const std::vector<int>& target_ids, const DecoderContext& ctx,
                                 std::vector<DecoderTraceStep>* trace = nullptr) const;

    // Sum of per-token log-likelihoods including the EOS term; no length
    // normalization.
    double score_candidate(Tape& t, const DecoderState& init, const std::vector<int>& target_ids,
                           const DecoderContext& ctx) const;

    // Argmax per step, ties broken toward the lowest token id; stops at EOS
    // or after max_len emitted tokens. EOS is not part of the result.
    std::vector<int> greedy_decode(Tape& t, const DecoderState& init, const DecoderContext& ctx,
                                   int max_len) const;

private:
    Parameter* embedding_;
    int hidden_;
    int vocab_size_;
    bool no_attd_;
    nn::LstmCell cell_;
    AttnTriple att_q_, att_u_, att_v_;
    Parameter* w_ctx_ = nullptr;  // hidden x (2*hidden + feat_dim)
    nn::Mlp2 head_;
};

// Single attention evaluation; exposed for the step-level tests.
struct AttnResult {
    Var attended = nullptr;  // src_dim x 1
    Var weights = nullptr;   // N x 1 simplex
};
AttnResult attend(Tape& t, const AttnTriple& p, Var src, Var h,
                  const std::vector<bool>* mask = nullptr);

}  // namespace dmrm
