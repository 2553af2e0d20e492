#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dwrl/estimators.hpp"
#include "dwrl/model.hpp"

namespace dwrl {

struct TrainConfig {
    int V = 8;                 // thought vocabulary of the trained model
    int T = 4;                 // thought length
    int group_size = 4;        // thoughts sampled per response
    int rollout_batch = 256;   // pairs rolled out per snapshot of phi_old
    int train_batch = 32;      // pairs per parameter update
    double learning_rate = 1e-2;
    double score_lr = -1.0;    // overrides learning_rate for the scoring step when >= 0
    double thought_lr = -1.0;  // overrides learning_rate for the thought step when >= 0
    int epochs = 2;
    double clip_epsilon = 0.2;
    double init_scale = 0.05;  // stddev of parameter init
    std::uint64_t seed = 1;
    int threads = 1;
    bool track_exact_loss = true;       // per-epoch enumerated loss when feasible
    int exact_loss_pairs = 0;           // 0 = whole training set
    std::size_t enum_cap = kDefaultEnumCap;

    double effective_score_lr() const { return score_lr >= 0.0 ? score_lr : learning_rate; }
    double effective_thought_lr() const { return thought_lr >= 0.0 ? thought_lr : learning_rate; }
    void validate() const;
};

struct HistoryRecord {
    int step = 0;
    int epoch = 0;
    std::optional<double> exact_loss;  // enumerated batch loss, epoch boundaries only
    double batch_accuracy = 0.0;
    std::optional<double> mean_misalignment;
    std::optional<double> mean_thought_entropy;  // -mean logprob / T of sampled thoughts
};

struct TrainState {
    GpmModel model;      // current parameters phi
    GpmModel model_old;  // rollout snapshot phi_old (ratio denominators)
    int step = 0;
    std::vector<HistoryRecord> history;

    void snapshot() { model_old = model; }
};

// Samples group_size thoughts per response under phi_old and computes answer
// probabilities, self-normalized weights, advantages and the misalignment
// weight, all under phi_old.
std::vector<DualWeights> rollout(const TrainState& state, const TrainConfig& config,
                                 const std::vector<const PreferencePair*>& batch, Rng rng);

// One descent step on the frozen-weight preference-scoring objective
//   -sum_pairs p_hat * sum_i (w+_i log pi(a|ctx+,o+_i) - w-_i log pi(a|ctx-,o-_i)).
// Only the answer head moves. Throws on non-finite gradients.
void score_step(TrainState& state, const TrainConfig& config,
                const std::vector<const PreferencePair*>& batch,
                const std::vector<DualWeights>& weights);

// Direction (gradient of the objective above) without applying it.
ParamVector score_step_direction(const GpmModel& model,
                                 const std::vector<const PreferencePair*>& batch,
                                 const std::vector<DualWeights>& weights,
                                 bool use_misalignment = true);

// Re-evaluates answer probabilities, weights, advantages and misalignment
// under the current parameters; thoughts and their sampling logprobs stay.
std::vector<DualWeights> recompute_weights(const TrainState& state,
                                           const std::vector<const PreferencePair*>& batch,
                                           const std::vector<DualWeights>& weights);

// One ascent step on the clipped thought-generation surrogate
//   sum_pairs (p_hat/n) sum_i tokenmean_t min(g_{i,t} A_i, clip(g_{i,t}) A_i)
// over both groups, ratios taken against phi_old. Only the policy moves.
void thought_step(TrainState& state, const TrainConfig& config,
                  const std::vector<const PreferencePair*>& batch,
                  const std::vector<DualWeights>& weights);

ParamVector thought_step_direction(const GpmModel& model, const GpmModel& model_old,
                                   const TrainConfig& config,
                                   const std::vector<const PreferencePair*>& batch,
                                   const std::vector<DualWeights>& weights,
                                   bool use_misalignment = true);

struct DwrlOptions {
    bool use_misalignment = true;        // false: ablation with p_hat := 1
    bool prefilled_thoughts = false;     // true: frozen thoughts, scoring-only updates
};

struct TrainResult {
    GpmModel model;
    std::vector<HistoryRecord> history;
};

struct BtTrainResult {
    BaselineScorer scorer;
    std::vector<HistoryRecord> history;
};

// Alternating schedule: per rollout phase snapshot phi_old, sample thoughts,
// then per train batch run score step, weight recomputation, thought step.
TrainResult train_dwrl(const TrainConfig& config, const std::vector<PreferencePair>& dataset,
                       const DwrlOptions& options = {});

TrainResult ablation_no_misalignment(const TrainConfig& config,
                                     const std::vector<PreferencePair>& dataset);

// One frozen thought per response; only the scoring head trains.
TrainResult ablation_prefilled_thoughts(const TrainConfig& config,
                                        const std::vector<PreferencePair>& dataset,
                                        const std::vector<DualWeights>& frozen_thoughts);

// Samples one thought per response from a freshly initialized model.
std::vector<DualWeights> generate_prefill_thoughts(const GpmModel& model,
                                                   const std::vector<PreferencePair>& dataset,
                                                   Rng rng);

BtTrainResult train_bt(const TrainConfig& config, const std::vector<PreferencePair>& dataset);

// GRPO on the joint-judgement toy model (features = concat of both contexts,
// presentation order randomized per rollout; the sampled verdict is part of
// the rollout, so its ratio trains the answer head too).
TrainResult train_grpo_pairwise(const TrainConfig& config,
                                const std::vector<PreferencePair>& dataset);

// GRPO on single-response scoring: rewards compare the answer probabilities
// of one sampled thought per response under phi_old.
TrainResult train_grpo_pointwise(const TrainConfig& config,
                                 const std::vector<PreferencePair>& dataset);

// Fresh model with seeded random parameters at config.init_scale.
GpmModel init_gpm(const TrainConfig& config, int V, int T, int d, std::uint64_t salt);

}  // namespace dwrl
