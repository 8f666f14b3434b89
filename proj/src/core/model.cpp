#include "model.hpp"

namespace dmrm {

namespace {
const ModelConfig& validated(const ModelConfig& c) {
    c.validate();
    return c;
}
}  // namespace

void ModelConfig::validate() const {
    require(embed_dim > 0 && hidden > 0 && d_track > 0 && d_locate > 0, "dims must be positive");
    require(hidden % 2 == 0, "hidden width must be even");
    require(n_hops >= 1, "n_hops must be positive");
    require(n_hops % 2 == 1, "reasoning valid only for odd hop counts");
}

Model::Model(const ModelConfig& cfg, int vocab_size, int feat_dim, std::uint64_t seed)
    : cfg_(validated(cfg)),
      vocab_size_(vocab_size),
      feat_dim_(feat_dim),
      init_rng_(seed),
      encoder_(params_, vocab_size, cfg.embed_dim, cfg.hidden, init_rng_),
      reasoning_(params_, cfg.n_hops, cfg.hidden, feat_dim, cfg.d_track, cfg.d_locate,
                 cfg.embed_dim, init_rng_),
      decoder_(params_, encoder_.embedding(), cfg.hidden, feat_dim, cfg.embed_dim, cfg.no_attd,
               init_rng_) {}

Model::DialogGraph Model::begin_dialog(Tape& t, const DialogInstance& dialog,
                                       const ImageFeatures& feats) const {
    require(feats.dim() == feat_dim_, "feature width mismatch");
    DialogGraph g;
    g.v = t.input(feats.matrix.transpose());
    g.hist_cols.reserve(dialog.rounds.size() + 1);
    g.hist_cols.push_back(
        encoder_.encode_ids(t, EncoderRole::kHistory, dialog.caption_ids).final);
    for (const DialogRound& r : dialog.rounds) {
        std::vector<int> qa = r.question_ids;
        qa.insert(qa.end(), r.answer_ids.begin(), r.answer_ids.end());
        g.hist_cols.push_back(encoder_.encode_ids(t, EncoderRole::kHistory, qa).final);
    }
    return g;
}

Model::RoundForward Model::round_forward(Tape& t, const DialogGraph& graph,
                                         const DialogInstance& dialog, int round,
                                         ReasoningTrace* trace) const {
    require(round >= 0 && round < static_cast<int>(dialog.rounds.size()), "round out of range");
    RoundForward fw;
    EncoderModule::SeqEncoding q =
        encoder_.encode_ids(t, EncoderRole::kQuestion, dialog.rounds[round].question_ids);
    std::vector<Var> cols(graph.hist_cols.begin(), graph.hist_cols.begin() + round + 1);
    Var u = ad::concat_cols(t, cols);
    ReasoningModule::ChannelOutputs outs =
        reasoning_.run_dual_channel(t, q.final, graph.v, u, trace, cfg_.no_track, cfg_.no_locate);
    fw.fused = reasoning_.fuse(t, q.final, outs);
    fw.ctx.q_tokens = q.states;
    fw.ctx.u = u;
    fw.ctx.v = graph.v;
    fw.ctx.fused = fw.fused;
    fw.init = decoder_.init_state(t, fw.fused, q.final, q.final_cell);
    return fw;
}

Var Model::round_nll(Tape& t, const RoundForward& fw, const std::vector<int>& answer_ids,
                     ReasoningTrace* trace) const {
    const std::vector<int> target = answer_target(answer_ids);
    DecoderModule::NllResult r =
        decoder_.teacher_forced_nll(t, fw.init, target, fw.ctx, trace ? &trace->decoder : nullptr);
    return ad::scale(t, r.total, 1.0 / static_cast<double>(r.per_token_logprob.size()));
}

double Model::score_candidate(Tape& t, const RoundForward& fw,
                              const std::vector<int>& candidate_ids) const {
    return decoder_.score_candidate(t, fw.init, answer_target(candidate_ids), fw.ctx);
}

std::vector<int> Model::greedy_answer(Tape& t, const RoundForward& fw, int max_len) const {
    return decoder_.greedy_decode(t, fw.init, fw.ctx, max_len);
}

std::vector<int> Model::answer_target(const std::vector<int>& answer_ids) {
    std::vector<int> target = answer_ids;
    target.push_back(Vocabulary::kEos);
    return target;
}

}  // namespace dmrm
