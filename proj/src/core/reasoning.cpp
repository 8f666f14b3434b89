#include "reasoning.hpp"

namespace dmrm {

TrackStepParams TrackStepParams::create(ParameterStore& ps, const std::string& prefix,
                                        int query_dim, int feat_dim, int d_track, Rng& rng) {
    TrackStepParams p;
    p.f_q = nn::Mlp2::create(ps, prefix + ".fq", query_dim, d_track, rng);
    p.f_v = nn::Mlp2::create(ps, prefix + ".fv", feat_dim, d_track, rng);
    p.logit = nn::Affine::create(ps, prefix + ".logit", d_track, 1, rng);
    return p;
}

LocateStepParams LocateStepParams::create(ParameterStore& ps, const std::string& prefix,
                                          int query_dim, int hist_dim, int d_locate, Rng& rng) {
    LocateStepParams p;
    p.f_q = nn::Mlp2::create(ps, prefix + ".fq", query_dim, d_locate, rng);
    p.f_u = nn::Mlp2::create(ps, prefix + ".fu", hist_dim, d_locate, rng);
    p.logit = nn::Affine::create(ps, prefix + ".logit", d_locate, 1, rng);
    p.post = nn::Mlp2::create(ps, prefix + ".post", hist_dim, hist_dim, rng);
    p.ln_gain = &ps.create(prefix + ".ln_gain", hist_dim, 1);
    p.ln_gain->value.setOnes();
    p.ln_bias = &ps.create(prefix + ".ln_bias", hist_dim, 1);
    return p;
}

AttEnhanceParams AttEnhanceParams::create(ParameterStore& ps, const std::string& prefix,
                                          int q_dim, int rep_dim, int out_dim, Rng& rng) {
    AttEnhanceParams p;
    p.f_q = nn::Mlp2::create(ps, prefix + ".fq", q_dim, out_dim, rng);
    p.f_rep = nn::Mlp2::create(ps, prefix + ".frep", rep_dim, out_dim, rng);
    return p;
}

ReasoningModule::StepResult track_step(Tape& t, const TrackStepParams& p, Var query, Var v) {
    require(query->value.allFinite() && v->value.allFinite(), "non-finite inputs to track step");
    require(query->cols() == 1, "track query must be a column vector");
    Var s = ad::hadamard_col_broadcast(t, p.f_v.apply(t, v), p.f_q.apply(t, query));
    Var logits = ad::transpose(t, p.logit.apply(t, s));  // K x 1
    ReasoningModule::StepResult r;
    r.weights = ad::softmax_col(t, logits);
    r.out = ad::matmul(t, v, r.weights);
    return r;
}

ReasoningModule::StepResult locate_step(Tape& t, const LocateStepParams& p, Var query, Var u) {
    require(query->value.allFinite() && u->value.allFinite(), "non-finite inputs to locate step");
    require(query->cols() == 1, "locate query must be a column vector");
    Var z = ad::hadamard_col_broadcast(t, p.f_u.apply(t, u), p.f_q.apply(t, query));
    Var logits = ad::transpose(t, p.logit.apply(t, z));  // T x 1
    ReasoningModule::StepResult r;
    r.weights = ad::softmax_col(t, logits);
    Var attended = ad::matmul(t, u, r.weights);
    Var g = p.post.apply(t, attended);
    Var residual = ad::add(t, g, ad::col(t, u, 0));
    r.out = ad::layer_norm(t, residual, t.param(*p.ln_gain), t.param(*p.ln_bias), kLayerNormEps);
    return r;
}

Var att_enhance(Tape& t, const AttEnhanceParams& p, Var q, Var rep) {
    require(p.f_q.out_width() == p.f_rep.out_width(),
            "att-enhance perceptron output widths differ");
    return ad::hadamard(t, p.f_q.apply(t, q), p.f_rep.apply(t, rep));
}

Var fuse_channels(Tape& t, const FusionParams& p, Var q_hat_track, Var q_hat_locate) {
    Var e = ad::concat_rows(t, {p.proj_track.apply(t, q_hat_track),
                                p.proj_locate.apply(t, q_hat_locate)});
    return ad::tanh(t, p.joint.apply(t, e));
}

ReasoningModule::ReasoningModule(ParameterStore& ps, int n_hops, int hidden, int feat_dim,
                                 int d_track, int d_locate, int fused_dim, Rng& rng)
    : n_hops_(n_hops), hidden_(hidden), feat_dim_(feat_dim), fused_dim_(fused_dim) {
    require(n_hops >= 1, "n_hops must be positive");
    require(n_hops % 2 == 1, "reasoning valid only for odd hop counts");

    for (int ci = 0; ci < 2; ++ci) {
        const Channel ch = static_cast<Channel>(ci);
        const std::string cname = ch == Channel::kTrack ? "track" : "locate";
        int in_width = hidden;  // hop 1 consumes the question
        for (int hop = 1; hop <= n_hops; ++hop) {
            const bool is_track_step =
                (ch == Channel::kTrack) ? (hop % 2 == 1) : (hop % 2 == 0);
            if (hop == 3) in_width = hidden;  // inter-hop Att-Enhance output
            const std::string prefix =
                "reason." + cname + ".hop" + std::to_string(hop) + (is_track_step ? ".t" : ".l");
            if (is_track_step) {
                track_steps_[ci].push_back(
                    TrackStepParams::create(ps, prefix, in_width, feat_dim, d_track, rng));
                in_width = feat_dim;
            } else {
                locate_steps_[ci].push_back(
                    LocateStepParams::create(ps, prefix, in_width, hidden, d_locate, rng));
                in_width = hidden;
            }
        }
    }

    const int d_att = hidden;
    fusion_.f_q_att = nn::Mlp2::create(ps, "fusion.fq_att", hidden, d_att, rng);
    fusion_.f_h_att = nn::Mlp2::create(ps, "fusion.fh_att", feat_dim, d_att, rng);  // track out
    fusion_.f_v_att = nn::Mlp2::create(ps, "fusion.fv_att", hidden, d_att, rng);    // locate out
    fusion_.proj_track = nn::Affine::create(ps, "fusion.proj_track", d_att, hidden, rng);
    fusion_.proj_locate = nn::Affine::create(ps, "fusion.proj_locate", d_att, hidden, rng);
    fusion_.joint = nn::Affine::create(ps, "fusion.joint", 2 * hidden, fused_dim, rng);
    if (n_hops >= 3) {
        fusion_.has_inter = true;
        // track channel: hop 2 is a Locate step (width D); locate channel:
        // hop 2 is a Track step (width V)
        fusion_.inter_track =
            AttEnhanceParams::create(ps, "fusion.inter_track", hidden, hidden, hidden, rng);
        fusion_.inter_locate =
            AttEnhanceParams::create(ps, "fusion.inter_locate", hidden, feat_dim, hidden, rng);
    }
}

Var ReasoningModule::run_channel(Tape& t, Channel ch, Var q, Var v, Var u,
                                 std::vector<TraceStep>* steps) const {
    const int ci = static_cast<int>(ch);
    std::size_t track_i = 0, locate_i = 0;
    Var cur = q;
    for (int hop = 1; hop <= n_hops_; ++hop) {
        const bool is_track_step = (ch == Channel::kTrack) ? (hop % 2 == 1) : (hop % 2 == 0);
        if (hop == 3 && fusion_.has_inter) {
            const AttEnhanceParams& ae =
                ch == Channel::kTrack ? fusion_.inter_track : fusion_.inter_locate;
            cur = att_enhance(t, ae, q, cur);
        }
        StepResult r = is_track_step
                           ? track_step(t, track_steps_[ci][track_i++], cur, v)
                           : locate_step(t, locate_steps_[ci][locate_i++], cur, u);
        if (steps) {
            TraceStep ts;
            ts.kind = is_track_step ? 'T' : 'L';
            const auto& w = r.weights->value;
            ts.weights.assign(w.data(), w.data() + w.rows());
            steps->push_back(std::move(ts));
        }
        cur = r.out;
    }
    return cur;
}

ReasoningModule::ChannelOutputs ReasoningModule::run_dual_channel(Tape& t, Var q, Var v, Var u,
                                                                  ReasoningTrace* trace,
                                                                  bool skip_track,
                                                                  bool skip_locate) const {
    ChannelOutputs out;
    if (!skip_track)
        out.track = run_channel(t, Channel::kTrack, q, v, u, trace ? &trace->track : nullptr);
    if (!skip_locate)
        out.locate = run_channel(t, Channel::kLocate, q, v, u, trace ? &trace->locate : nullptr);
    return out;
}

Var ReasoningModule::fuse(Tape& t, Var q, const ChannelOutputs& outs) const {
    Var half_track = outs.track
                         ? fusion_.proj_track.apply(
                               t, att_enhance(t, AttEnhanceParams{fusion_.f_q_att, fusion_.f_h_att},
                                              q, outs.track))
                         : t.input(Matrix::Zero(hidden_, 1));
    Var half_locate = outs.locate
                          ? fusion_.proj_locate.apply(
                                t, att_enhance(t, AttEnhanceParams{fusion_.f_q_att, fusion_.f_v_att},
                                               q, outs.locate))
                          : t.input(Matrix::Zero(hidden_, 1));
    Var e = ad::concat_rows(t, {half_track, half_locate});
    return ad::tanh(t, fusion_.joint.apply(t, e));
}

}  // namespace dmrm
