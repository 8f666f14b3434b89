#pragma once

#include <string>
#include <vector>

#include "ad.hpp"
#include "nn.hpp"
#include "params.hpp"

namespace dmrm {

using ad::Tape;
using ad::Var;

// Attention over the K object columns of v, guided by a query vector.
struct TrackStepParams {
    nn::Mlp2 f_q;       // query -> d_track
    nn::Mlp2 f_v;       // V -> d_track
    nn::Affine logit;   // d_track -> 1, applied per object

    static TrackStepParams create(ParameterStore& ps, const std::string& prefix, int query_dim,
                                  int feat_dim, int d_track, Rng& rng);
};

// Attention over the T round columns of u with a caption residual and
// layer normalization.
struct LocateStepParams {
    nn::Mlp2 f_q;         // query -> d_locate
    nn::Mlp2 f_u;         // D -> d_locate
    nn::Affine logit;     // d_locate -> 1, applied per round
    nn::Mlp2 post;        // D -> D, applied to the attended history
    Parameter* ln_gain = nullptr;
    Parameter* ln_bias = nullptr;

    static LocateStepParams create(ParameterStore& ps, const std::string& prefix, int query_dim,
                                   int hist_dim, int d_locate, Rng& rng);
};

// Hadamard gating of a representation by a projected question feature.
struct AttEnhanceParams {
    nn::Mlp2 f_q;
    nn::Mlp2 f_rep;

    static AttEnhanceParams create(ParameterStore& ps, const std::string& prefix, int q_dim,
                                   int rep_dim, int out_dim, Rng& rng);
};

// Final Att-Enhance pair (shared f_q_att), per-channel projections, the joint
// tanh projection, and the inter-hop Att-Enhance pair used between hops 2
// and 3.
struct FusionParams {
    nn::Mlp2 f_q_att;    // question -> d_att, shared by both channels
    nn::Mlp2 f_h_att;    // track-channel output -> d_att
    nn::Mlp2 f_v_att;    // locate-channel output -> d_att
    nn::Affine proj_track;
    nn::Affine proj_locate;
    nn::Affine joint;    // concat of the two projections -> fused width
    AttEnhanceParams inter_track;   // between hops 2 and 3, track channel
    AttEnhanceParams inter_locate;  // between hops 2 and 3, locate channel
    bool has_inter = false;
};

struct TraceStep {
    char kind = '?';               // 'T' or 'L'
    std::vector<double> weights;   // objects 0..K-1 or rounds 0..T-1
};

struct DecoderTraceStep {
    int step = 0;
    std::vector<double> alpha_q;
    std::vector<double> alpha_u;
    std::vector<double> alpha_v;
};

struct ReasoningTrace {
    std::vector<TraceStep> track;
    std::vector<TraceStep> locate;
    std::vector<DecoderTraceStep> decoder;
};

enum class Channel { kTrack, kLocate };

// Per-hop, per-channel unshared step parameters plus the fusion block.
class ReasoningModule {
public:
    // hidden = D (history/question width), feat_dim = V, fused_dim = output
    // width of the joint projection. n_hops must be odd.
    ReasoningModule(ParameterStore& ps, int n_hops, int hidden, int feat_dim, int d_track,
                    int d_locate, int fused_dim, Rng& rng);

    int n_hops() const { return n_hops_; }
    int fused_dim() const { return fused_dim_; }
    const FusionParams& fusion() const { return fusion_; }

    struct StepResult {
        Var out = nullptr;
        Var weights = nullptr;  // simplex over objects or rounds
    };

    struct ChannelOutputs {
        Var track = nullptr;   // V-width (Track-final pathway), null when ablated
        Var locate = nullptr;  // D-width (Locate-final pathway), null when ablated
    };

    // Runs both channels for `n_hops` hops. The track channel alternates
    // T,L,T,...; the locate channel L,T,L,.... Between hops 2 and 3 each
    // channel's representation is re-gated by the original question via its
    // inter-hop Att-Enhance pair. Attention vectors are appended to `trace`
    // when given. Ablated channels (skip_track/skip_locate) are not run.
    ChannelOutputs run_dual_channel(Tape& t, Var q, Var v, Var u, ReasoningTrace* trace,
                                    bool skip_track = false, bool skip_locate = false) const;

    // Final Att-Enhance on both channel outputs (shared question perceptron),
    // per-channel projections, concatenation, joint tanh projection. Null
    // channel inputs contribute zeros to the concatenation.
    Var fuse(Tape& t, Var q, const ChannelOutputs& outs) const;

private:
    int n_hops_;
    int hidden_;
    int feat_dim_;
    int fused_dim_;
    std::vector<TrackStepParams> track_steps_[2];   // indexed by Channel
    std::vector<LocateStepParams> locate_steps_[2];
    FusionParams fusion_;

    Var run_channel(Tape& t, Channel ch, Var q, Var v, Var u, std::vector<TraceStep>* steps) const;
};

// Single-step operations; also used directly by the step-level tests.
ReasoningModule::StepResult track_step(Tape& t, const TrackStepParams& p, Var query, Var v);
ReasoningModule::StepResult locate_step(Tape& t, const LocateStepParams& p, Var query, Var u);
Var att_enhance(Tape& t, const AttEnhanceParams& p, Var q, Var rep);
Var fuse_channels(Tape& t, const FusionParams& p, Var q_hat_track, Var q_hat_locate);

constexpr double kLayerNormEps = 1e-5;

}  // namespace dmrm
