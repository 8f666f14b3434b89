#include "decoder.hpp"

namespace dmrm {

AttnTriple AttnTriple::create(ParameterStore& ps, const std::string& prefix, int src_dim,
                              int hidden, int d_att, Rng& rng) {
    AttnTriple p;
    p.w_src = &ps.create_uniform(prefix + ".src", d_att, src_dim, src_dim, rng);
    p.w_gate = &ps.create_uniform(prefix + ".gate", d_att, hidden, hidden, rng);
    p.w_out = &ps.create_uniform(prefix + ".out", 1, d_att, d_att, rng);
    return p;
}

AttnResult attend(Tape& t, const AttnTriple& p, Var src, Var h, const std::vector<bool>* mask) {
    Var z = ad::tanh(t, ad::add_col_broadcast(t, ad::matmul(t, t.param(*p.w_src), src),
                                              ad::matmul(t, t.param(*p.w_gate), h)));
    Var logits = ad::transpose(t, ad::matmul(t, t.param(*p.w_out), z));  // N x 1
    AttnResult r;
    r.weights = ad::softmax_col(t, logits, mask);
    r.attended = ad::matmul(t, src, r.weights);
    return r;
}

DecoderModule::DecoderModule(ParameterStore& ps, Parameter& embedding, int hidden, int feat_dim,
                             int fused_dim, bool no_attd, Rng& rng)
    : embedding_(&embedding),
      hidden_(hidden),
      vocab_size_(static_cast<int>(embedding.value.cols())),
      no_attd_(no_attd) {
    const int embed_dim = static_cast<int>(embedding.value.rows());
    require(fused_dim == embed_dim,
            "fused width must equal embedding width to seed the decoder");
    cell_ = nn::LstmCell::create(ps, "dec.cell", embed_dim, hidden, rng);
    int ctx_dim;
    if (no_attd_) {
        ctx_dim = fused_dim;
    } else {
        const int d_att = hidden;
        att_q_ = AttnTriple::create(ps, "dec.att.q", hidden, hidden, d_att, rng);
        att_u_ = AttnTriple::create(ps, "dec.att.u", hidden, hidden, d_att, rng);
        att_v_ = AttnTriple::create(ps, "dec.att.v", feat_dim, hidden, d_att, rng);
        w_ctx_ = &ps.create_uniform("dec.att.ctx", hidden, 2 * hidden + feat_dim,
                                    2 * hidden + feat_dim, rng);
        ctx_dim = hidden;
    }
    head_ = nn::Mlp2::create(ps, "dec.head", hidden + ctx_dim, hidden, vocab_size_, rng);
}

DecoderState DecoderModule::init_state(Tape& t, Var fused, Var q_final, Var q_final_cell) const {
    require(fused->rows() == embedding_->value.rows() && fused->cols() == 1,
            "decoder init: fused width mismatch");
    require(q_final->rows() == hidden_ && q_final_cell->rows() == hidden_,
            "decoder init: question state width mismatch");
    DecoderState s;
    s.rec = cell_.step(t, fused, nn::LstmCell::State{q_final, q_final_cell});
    s.step = 0;
    return s;
}

DecoderModule::StepOut DecoderModule::decode_step(Tape& t, const DecoderState& state,
                                                  int y_prev_id, const DecoderContext& ctx,
                                                  std::vector<DecoderTraceStep>* trace) const {
    StepOut out;
    Var x = ad::embed_cols(t, t.param(*embedding_), {y_prev_id});
    out.state.rec = cell_.step(t, x, state.rec);
    out.state.step = state.step + 1;
    Var h = out.state.rec.h;

    Var context = nullptr;
    if (no_attd_) {
        require(ctx.fused != nullptr, "decoder context missing the fused vector");
        context = ctx.fused;
    } else {
        AttnResult aq = attend(t, att_q_, ctx.q_tokens, h,
                               ctx.q_mask.empty() ? nullptr : &ctx.q_mask);
        AttnResult au = attend(t, att_u_, ctx.u, h);
        AttnResult av = attend(t, att_v_, ctx.v, h);
        Var merged = ad::concat_rows(t, {aq.attended, au.attended, av.attended});
        context = ad::tanh(t, ad::matmul(t, t.param(*w_ctx_), merged));
        if (trace) {
            DecoderTraceStep ts;
            ts.step = state.step;
            auto grab = [](Var w, std::vector<double>& dst) {
                dst.assign(w->value.data(), w->value.data() + w->value.rows());
            };
            grab(aq.weights, ts.alpha_q);
            grab(au.weights, ts.alpha_u);
            grab(av.weights, ts.alpha_v);
            trace->push_back(std::move(ts));
        }
    }
    out.logits = head_.apply(t, ad::concat_rows(t, {h, context}));
    return out;
}

DecoderModule::NllResult DecoderModule::teacher_forced_nll(
    Tape& t, const DecoderState& init, const std::vector<int>& target_ids,
    const DecoderContext& ctx, std::vector<DecoderTraceStep>* trace) const {
    require(!target_ids.empty(), "empty answer");
    NllResult r;
    DecoderState state = init;
    Var sum_logprob = nullptr;
    for (std::size_t i = 0; i < target_ids.size(); ++i) {
        const int prev = i == 0 ? Vocabulary::kBos : target_ids[i - 1];
        StepOut so = decode_step(t, state, prev, ctx, trace);
        state = so.state;
        if (target_ids[i] == Vocabulary::kPad) continue;
        Var logp = ad::log_softmax_col(t, so.logits);
        Var pick = ad::rows(t, logp, target_ids[i], 1);
        r.per_token_logprob.push_back(pick->value(0, 0));
        sum_logprob = sum_logprob ? ad::add(t, sum_logprob, pick) : pick;
    }
    require(sum_logprob != nullptr, "empty answer");
    r.total = ad::scale(t, sum_logprob, -1.0);
    return r;
}

double DecoderModule::score_candidate(Tape& t, const DecoderState& init,
                                      const std::vector<int>& target_ids,
                                      const DecoderContext& ctx) const {
    return -teacher_forced_nll(t, init, target_ids, ctx).total->value(0, 0);
}

std::vector<int> DecoderModule::greedy_decode(Tape& t, const DecoderState& init,
                                              const DecoderContext& ctx, int max_len) const {
    require(max_len >= 1, "max_len must be positive");
    std::vector<int> out;
    DecoderState state = init;
    int prev = Vocabulary::kBos;
    for (int i = 0; i < max_len; ++i) {
        StepOut so = decode_step(t, state, prev, ctx);
        const Matrix& logits = so.logits->value;
        int best = 0;
        for (int r = 1; r < logits.rows(); ++r)
            if (logits(r, 0) > logits(best, 0)) best = r;
        if (best == Vocabulary::kEos) break;
        out.push_back(best);
        state = so.state;
        prev = best;
    }
    return out;
}

}  // namespace dmrm
