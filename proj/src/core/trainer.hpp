#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "model.hpp"

namespace dmrm {

struct TrainConfig {
    double base_lr = 1e-3;
    double min_lr = 1e-5;
    int warmup_steps = 20;
    int total_steps = 200;
    int batch_size = 16;
    double clip_norm = 5.0;
    std::uint64_t seed = 7;
    ModelConfig model;

    void validate() const;
};

// Linear ramp min_lr -> base_lr over warmup_steps, then linear decay
// base_lr -> min_lr at total_steps; clamped to min_lr beyond.
double lr_schedule(const TrainConfig& cfg, int step);

// Adam with bias correction and optional global-norm clipping. Frozen
// parameter columns receive no updates and accumulate no moments.
class AdamOptimizer {
public:
    explicit AdamOptimizer(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    // One update from the currently accumulated gradients. Returns the
    // pre-clip global gradient norm.
    double step(ParameterStore& ps, double lr, double clip_norm);

    int steps_taken() const { return t_; }

private:
    double beta1_, beta2_, eps_;
    int t_ = 0;
};

struct TrainLogEntry {
    int step = 0;
    double loss = 0.0;
    double lr = 0.0;
};

struct TrainOptions {
    std::string log_path;         // newline-delimited JSON, empty = no file
    std::string checkpoint_path;  // empty = no checkpointing
    int checkpoint_every = 0;     // extra saves every N steps; final always saved
    std::uint64_t vocab_fingerprint = 0;
};

struct TrainResult {
    std::vector<TrainLogEntry> log;
};

// Deterministic epoch-shuffled mini-batch training. The per-batch loss is the
// mean over dialogs of the per-dialog mean over rounds of the per-token mean
// NLL, so neither answer length nor dialog length reweights anything.
TrainResult train(Model& model, const Corpus& corpus, const TrainConfig& cfg,
                  const TrainOptions& opts = {});

// ---- gradient checking ----

struct GradCheckGroup {
    std::string name;
    double max_err = 0.0;  // relative where the scale allows, absolute near zero
};

struct GradCheckReport {
    std::vector<GradCheckGroup> groups;
    double worst = 0.0;
};

// Central finite differences against the analytic gradient of the corpus NLL
// restricted to the first `max_dialogs` dialogs. Up to `samples_per_param`
// entries per parameter are probed. Naming a parameter in `corrupt` perturbs
// its analytic gradient first (negative-control fixture).
GradCheckReport gradient_check(Model& model, const Corpus& corpus, double epsilon = 1e-5,
                               int max_dialogs = 2, int samples_per_param = 4,
                               const std::string& corrupt = "");

// ---- checkpointing ----

// Single-file container: magic, format version, JSON manifest (model config,
// vocab fingerprint, step), then every named parameter array in creation
// order as little-endian float64.
void save_checkpoint(const std::string& path, const Model& model,
                     std::uint64_t vocab_fingerprint, int step);

struct LoadedCheckpoint {
    std::unique_ptr<Model> model;
    std::uint64_t vocab_fingerprint = 0;
    int step = 0;
};

// expected_vocab_fingerprint != 0 enforces the pairing between checkpoint and
// corpus vocabulary.
LoadedCheckpoint load_checkpoint(const std::string& path,
                                 std::uint64_t expected_vocab_fingerprint = 0);

}  // namespace dmrm
