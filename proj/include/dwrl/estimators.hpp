#pragma once

#include <string>
#include <vector>

#include "dwrl/model.hpp"

namespace dwrl {

struct PreferencePair {
    FeatureVector ctx_plus;
    FeatureVector ctx_minus;
    std::string pair_id;
};

// n sampled thoughts for one response, with conditional answer probabilities,
// self-normalized weights and centered advantages.
struct ThoughtGroup {
    std::vector<Thought> thoughts;
    std::vector<double> answer_probs;  // pi(a | ctx, o_i), clamped
    std::vector<double> norm_weights;  // w_i = p_i / sum_j p_j
    std::vector<double> advantages;    // A_i = w_i - 1/n

    std::size_t size() const { return thoughts.size(); }
    double prob_sum() const;
};

// Per-pair weights: instance-level misalignment plus both thought groups.
struct DualWeights {
    double misalignment = 0.0;  // p_hat(y+ < y- | x)
    ThoughtGroup group_plus;
    ThoughtGroup group_minus;
};

struct PairEstimate {
    double p_plus = 0.0;   // exact marginal answer probability for ctx_plus
    double p_minus = 0.0;  // same for ctx_minus
    double loss = 0.0;     // -log(p_plus / (p_plus + p_minus))
};

// Scalar linear baseline: r(ctx) = u . ctx + bias.
struct BaselineScorer {
    std::vector<double> weights;
    double bias = 0.0;

    double score(const FeatureVector& ctx) const;
};

// -log sigmoid(r_plus - r_minus), computed as a stable softplus.
double bt_loss(double r_plus, double r_minus);

// sigmoid(r_plus - r_minus)
double bt_preference_prob(double r_plus, double r_minus);

// Exact marginal p = sum_o pi(o|ctx) * pi(a|ctx,o) by full enumeration.
double exact_marginal(const GpmModel& model, const FeatureVector& ctx,
                      std::size_t cap = kDefaultEnumCap);

// Exact pair loss from the two enumerated marginals.
PairEstimate exact_loss(const GpmModel& model, const PreferencePair& pair,
                        std::size_t cap = kDefaultEnumCap);

// Exact loss gradient: -(p-/(p+ + p-)) (grad log p+ - grad log p-), with each
// grad p expanded by the policy-gradient identity and summed over the full
// thought space.
ParamVector exact_gradient(const GpmModel& model, const PreferencePair& pair,
                           std::size_t cap = kDefaultEnumCap);

// w_i = p_i / sum_j p_j. Throws on empty input.
std::vector<double> self_normalized_weights(const std::vector<double>& answer_probs);

// Group-sum misalignment estimate: sum(p-) / (sum(p+) + sum(p-)).
double misalignment_weight(const ThoughtGroup& group_plus, const ThoughtGroup& group_minus);

// Builds a ThoughtGroup (answer probs, weights, advantages) for given thoughts.
ThoughtGroup make_thought_group(const GpmModel& model, const FeatureVector& ctx,
                                std::vector<Thought> thoughts);

// Samples both groups and assembles the dual weights for one pair.
DualWeights make_dual_weights(const GpmModel& model, const PreferencePair& pair, int n, Rng rng);

// Monte Carlo estimate of the exact loss gradient from two sampled groups:
// the misalignment weight scales the whole estimate, the self-normalized
// weights drive the scoring term and their centered advantages drive the
// thought-generation term.
ParamVector dwrl_gradient_estimate(const GpmModel& model, const PreferencePair& pair,
                                   const ThoughtGroup& group_plus,
                                   const ThoughtGroup& group_minus);

// Group-standardized advantages (population std). Zero variance yields all
// zeros. Throws unless rewards.size() >= 2.
std::vector<double> grpo_advantages(const std::vector<double>& rewards);

enum class Verdict { A, B };

// 1 if the judged verdict matches the human label, else 0.
double pairwise_reward(Verdict verdict, Verdict human_label);

// 1 if s_plus > s_minus, else 0 (ties included).
double pointwise_reward(double s_plus, double s_minus);

// Mean over samples of the token-mean clipped surrogate
// min(g*A, clip(g, 1-eps, 1+eps)*A).
double grpo_clipped_objective(const std::vector<std::vector<double>>& ratios,
                              const std::vector<double>& advantages, double epsilon);

}  // namespace dwrl
