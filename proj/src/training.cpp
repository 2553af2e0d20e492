#include "dwrl/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "dwrl/parallel.hpp"

namespace dwrl {

namespace {

constexpr std::uint64_t kInitKey = 0x1001;
constexpr std::uint64_t kShuffleKey = 0x2001;
constexpr std::uint64_t kRolloutKey = 0x3001;
constexpr std::uint64_t kOrderKey = 0x4001;
constexpr std::uint64_t kPrefillKey = 0x5001;

void check_finite(const ParamVector& g, const char* what, int step) {
    for (double x : g) {
        if (!std::isfinite(x)) {
            throw std::runtime_error(std::string(what) + " produced a non-finite gradient at step " +
                                     std::to_string(step));
        }
    }
}

double clip(double g, double eps) { return std::min(std::max(g, 1.0 - eps), 1.0 + eps); }

// per-token log probabilities of `tokens` under `model`
std::vector<double> token_logprobs(const GpmModel& model, const FeatureVector& ctx,
                                   std::span<const int> tokens) {
    std::vector<double> lp(tokens.size());
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        auto z = thought_step_logits(model, ctx, tokens.subspan(0, t));
        lp[t] = log_softmax_at(z, tokens[t]);
    }
    return lp;
}

// Clipped-surrogate contribution of one thought group: for every unclipped
// token, coeff * A_i * g_{i,t} * grad log pi(o_t | prefix) accumulated on the
// policy block.
void accumulate_group_surrogate(const GpmModel& model, const GpmModel& model_old,
                                const FeatureVector& ctx, const ThoughtGroup& group,
                                double coeff, double eps, ParamVector& out, int step) {
    const double inv_T = 1.0 / static_cast<double>(model.T);
    for (std::size_t i = 0; i < group.size(); ++i) {
        const double adv = group.advantages[i];
        const auto& tokens = group.thoughts[i].tokens;
        const auto lp_old = token_logprobs(model_old, ctx, tokens);
        for (std::size_t t = 0; t < tokens.size(); ++t) {
            auto z = thought_step_logits(model, ctx,
                                         std::span<const int>(tokens).subspan(0, t));
            const double lp_cur = log_softmax_at(z, tokens[t]);
            const double g = std::exp(lp_cur - lp_old[t]);
            if (!std::isfinite(g)) {
                throw std::runtime_error("non-finite policy ratio in thought step at step " +
                                         std::to_string(step));
            }
            if (g * adv > clip(g, eps) * adv) continue;  // clipped: zero gradient
            const double w = coeff * inv_T * adv * g;
            if (w == 0.0) continue;
            auto q = softmax(z);
            std::vector<double> c(static_cast<std::size_t>(model.V), 0.0);
            for (std::size_t s = 0; s < t; ++s) c[static_cast<std::size_t>(tokens[s])] += inv_T;
            for (int v = 0; v < model.V; ++v) {
                const double resid =
                    (v == tokens[t] ? 1.0 : 0.0) - q[static_cast<std::size_t>(v)];
                const double wv = w * resid;
                for (int k = 0; k < model.d; ++k) {
                    out[model.a_index(v, k)] += wv * ctx[static_cast<std::size_t>(k)];
                }
                for (int u = 0; u < model.V; ++u) {
                    out[model.b_index(v, u)] += wv * c[static_cast<std::size_t>(u)];
                }
            }
        }
    }
}

double group_entropy_rate(const ThoughtGroup& group, int T) {
    double acc = 0.0;
    for (const Thought& th : group.thoughts) acc -= th.logprob / static_cast<double>(T);
    return acc / static_cast<double>(group.size());
}

struct EpochPlan {
    std::vector<std::size_t> order;  // shuffled indices into the dataset
};

std::vector<const PreferencePair*> slice(const std::vector<PreferencePair>& dataset,
                                         const std::vector<std::size_t>& order, std::size_t lo,
                                         std::size_t hi) {
    std::vector<const PreferencePair*> out;
    out.reserve(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) out.push_back(&dataset[order[i]]);
    return out;
}

double mean_exact_loss(const GpmModel& model, const std::vector<PreferencePair>& dataset,
                       const TrainConfig& config) {
    std::size_t count = dataset.size();
    if (config.exact_loss_pairs > 0) {
        count = std::min(count, static_cast<std::size_t>(config.exact_loss_pairs));
    }
    std::vector<double> losses(count, 0.0);
    parallel_for(count, config.threads, [&](std::size_t i) {
        losses[i] = exact_loss(model, dataset[i], config.enum_cap).loss;
    });
    double total = 0.0;
    for (double l : losses) total += l;
    return total / static_cast<double>(count);
}

bool exact_loss_feasible(const TrainConfig& config, int V, int T) {
    if (!config.track_exact_loss) return false;
    std::size_t n = 1;
    for (int t = 0; t < T; ++t) {
        if (n > config.enum_cap / static_cast<std::size_t>(V)) return false;
        n *= static_cast<std::size_t>(V);
    }
    return n <= config.enum_cap;
}

int infer_dim(const std::vector<PreferencePair>& dataset) {
    if (dataset.empty()) throw std::invalid_argument("empty dataset");
    return static_cast<int>(dataset.front().ctx_plus.size());
}

}  // namespace

void TrainConfig::validate() const {
    if (group_size < 1) throw std::invalid_argument("group_size must be >= 1");
    if (clip_epsilon <= 0.0) throw std::invalid_argument("clip_epsilon must be > 0");
    if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be > 0");
    if (rollout_batch < 1 || train_batch < 1) throw std::invalid_argument("batch sizes must be >= 1");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
}

GpmModel init_gpm(const TrainConfig& config, int V, int T, int d, std::uint64_t salt) {
    GpmModel model(V, T, d);
    Rng rng = Rng(config.seed).child(kInitKey).child(salt);
    model.randomize(config.init_scale, rng);
    return model;
}

std::vector<DualWeights> rollout(const TrainState& state, const TrainConfig& config,
                                 const std::vector<const PreferencePair*>& batch, Rng rng) {
    if (batch.empty()) throw std::invalid_argument("rollout requires a non-empty batch");
    std::vector<DualWeights> out(batch.size());
    parallel_for(batch.size(), config.threads, [&](std::size_t i) {
        out[i] = make_dual_weights(state.model_old, *batch[i], config.group_size,
                                   rng.child(static_cast<std::uint64_t>(i)));
    });
    return out;
}

ParamVector score_step_direction(const GpmModel& model,
                                 const std::vector<const PreferencePair*>& batch,
                                 const std::vector<DualWeights>& weights, bool use_misalignment) {
    ParamVector g(model.param_count(), 0.0);
    for (std::size_t p = 0; p < batch.size(); ++p) {
        const DualWeights& dw = weights[p];
        const double p_hat = use_misalignment ? dw.misalignment : 1.0;
        for (std::size_t i = 0; i < dw.group_plus.size(); ++i) {
            accumulate_grad_log_answer_prob(model, batch[p]->ctx_plus,
                                            dw.group_plus.thoughts[i].tokens,
                                            -p_hat * dw.group_plus.norm_weights[i], g);
        }
        for (std::size_t i = 0; i < dw.group_minus.size(); ++i) {
            accumulate_grad_log_answer_prob(model, batch[p]->ctx_minus,
                                            dw.group_minus.thoughts[i].tokens,
                                            p_hat * dw.group_minus.norm_weights[i], g);
        }
    }
    return g;
}

void score_step(TrainState& state, const TrainConfig& config,
                const std::vector<const PreferencePair*>& batch,
                const std::vector<DualWeights>& weights) {
    score_step_internal(state, config, batch, weights, true);
}

namespace {
// shared by the public entry point and the ablation path
void apply_score_step(TrainState& state, const TrainConfig& config,
                      const std::vector<const PreferencePair*>& batch,
                      const std::vector<DualWeights>& weights, bool use_misalignment) {
    const ParamVector g = score_step_direction(state.model, batch, weights, use_misalignment);
    check_finite(g, "score step", state.step);
    const double lr = config.effective_score_lr();
    for (std::size_t i = 0; i < g.size(); ++i) state.model.params[i] -= lr * g[i];
}
}  // namespace

std::vector<DualWeights> recompute_weights(const TrainState& state,
                                           const std::vector<const PreferencePair*>& batch,
                                           const std::vector<DualWeights>& weights) {
    std::vector<DualWeights> out(weights.size());
    for (std::size_t p = 0; p < weights.size(); ++p) {
        out[p].group_plus =
            make_thought_group(state.model, batch[p]->ctx_plus, weights[p].group_plus.thoughts);
        out[p].group_minus =
            make_thought_group(state.model, batch[p]->ctx_minus, weights[p].group_minus.thoughts);
        out[p].misalignment = misalignment_weight(out[p].group_plus, out[p].group_minus);
    }
    return out;
}

ParamVector thought_step_direction(const GpmModel& model, const GpmModel& model_old,
                                   const TrainConfig& config,
                                   const std::vector<const PreferencePair*>& batch,
                                   const std::vector<DualWeights>& weights,
                                   bool use_misalignment) {
    ParamVector g(model.param_count(), 0.0);
    for (std::size_t p = 0; p < batch.size(); ++p) {
        const DualWeights& dw = weights[p];
        const double p_hat = use_misalignment ? dw.misalignment : 1.0;
        const double coeff = p_hat / static_cast<double>(dw.group_plus.size());
        accumulate_group_surrogate(model, model_old, batch[p]->ctx_plus, dw.group_plus, coeff,
                                   config.clip_epsilon, g, 0);
        accumulate_group_surrogate(model, model_old, batch[p]->ctx_minus, dw.group_minus, coeff,
                                   config.clip_epsilon, g, 0);
    }
    return g;
}

void thought_step(TrainState& state, const TrainConfig& config,
                  const std::vector<const PreferencePair*>& batch,
                  const std::vector<DualWeights>& weights) {
    const ParamVector g =
        thought_step_direction(state.model, state.model_old, config, batch, weights, true);
    check_finite(g, "thought step", state.step);
    const double lr = config.effective_thought_lr();
    for (std::size_t i = 0; i < g.size(); ++i) state.model.params[i] += lr * g[i];
}

namespace {

void apply_thought_step(TrainState& state, const TrainConfig& config,
                        const std::vector<const PreferencePair*>& batch,
                        const std::vector<DualWeights>& weights, bool use_misalignment) {
    const ParamVector g = thought_step_direction(state.model, state.model_old, config, batch,
                                                 weights, use_misalignment);
    check_finite(g, "thought step", state.step);
    const double lr = config.effective_thought_lr();
    for (std::size_t i = 0; i < g.size(); ++i) state.model.params[i] += lr * g[i];
}

HistoryRecord batch_record(const TrainState& state, int epoch,
                           const std::vector<DualWeights>& refreshed) {
    HistoryRecord rec;
    rec.step = state.step;
    rec.epoch = epoch;
    double acc = 0.0;
    double mis = 0.0;
    double ent = 0.0;
    for (const DualWeights& dw : refreshed) {
        if (dw.misalignment < 0.5) acc += 1.0;
        else if (dw.misalignment == 0.5) acc += 0.5;
        mis += dw.misalignment;
        ent += 0.5 * (group_entropy_rate(dw.group_plus, dw.group_plus.thoughts[0].tokens.empty()
                                                            ? 1
                                                            : static_cast<int>(
                                                                  dw.group_plus.thoughts[0]
                                                                      .tokens.size())) +
                      group_entropy_rate(dw.group_minus,
                                         dw.group_minus.thoughts[0].tokens.empty()
                                             ? 1
                                             : static_cast<int>(
                                                   dw.group_minus.thoughts[0].tokens.size())));
    }
    const double n = static_cast<double>(refreshed.size());
    rec.batch_accuracy = acc / n;
    rec.mean_misalignment = mis / n;
    rec.mean_thought_entropy = ent / n;
    return rec;
}

}  // namespace

TrainResult train_dwrl(const TrainConfig& config, const std::vector<PreferencePair>& dataset,
                       const DwrlOptions& options) {
    config.validate();
    const int d = infer_dim(dataset);
    // V and T come from the task layout d = 2V; T is configured via the model factory
    throw std::logic_error("train_dwrl requires model dimensions; use train_dwrl(config, dims, dataset)");
}

}  // namespace dwrl
