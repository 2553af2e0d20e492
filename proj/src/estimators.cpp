#include "dwrl/estimators.hpp"

#include <cmath>
#include <stdexcept>

namespace dwrl {

double ThoughtGroup::prob_sum() const {
    double s = 0.0;
    for (double p : answer_probs) s += p;
    return s;
}

double BaselineScorer::score(const FeatureVector& ctx) const {
    if (ctx.size() != weights.size()) {
        throw std::invalid_argument("scorer/feature dimension mismatch");
    }
    double r = bias;
    for (std::size_t k = 0; k < ctx.size(); ++k) r += weights[k] * ctx[k];
    return r;
}

double bt_loss(double r_plus, double r_minus) {
    const double m = r_plus - r_minus;
    // softplus(-m) = log(1 + exp(-m)) without overflow
    if (m > 0.0) return std::log1p(std::exp(-m));
    return -m + std::log1p(std::exp(m));
}

double bt_preference_prob(double r_plus, double r_minus) {
    return 1.0 / (1.0 + std::exp(-(r_plus - r_minus)));
}

double exact_marginal(const GpmModel& model, const FeatureVector& ctx, std::size_t cap) {
    double p = 0.0;
    for_each_thought(
        model, ctx,
        [&](std::span<const int> tokens, double lp) {
            p += std::exp(lp) * answer_prob(model, ctx, tokens);
        },
        cap);
    return p;
}

PairEstimate exact_loss(const GpmModel& model, const PreferencePair& pair, std::size_t cap) {
    PairEstimate est;
    est.p_plus = exact_marginal(model, pair.ctx_plus, cap);
    est.p_minus = exact_marginal(model, pair.ctx_minus, cap);
    est.loss = -std::log(est.p_plus / (est.p_plus + est.p_minus));
    return est;
}

namespace {

// grad p = sum_o pi(o) pi(a|o) (grad log pi(a|o) + grad log pi(o))
ParamVector exact_grad_marginal(const GpmModel& model, const FeatureVector& ctx,
                                std::size_t cap) {
    ParamVector g(model.param_count(), 0.0);
    for_each_thought(
        model, ctx,
        [&](std::span<const int> tokens, double lp) {
            const double w = std::exp(lp) * answer_prob(model, ctx, tokens);
            accumulate_grad_log_answer_prob(model, ctx, tokens, w, g);
            accumulate_grad_log_thought_prob(model, ctx, tokens, w, g);
        },
        cap);
    return g;
}

}  // namespace

ParamVector exact_gradient(const GpmModel& model, const PreferencePair& pair, std::size_t cap) {
    const double p_plus = exact_marginal(model, pair.ctx_plus, cap);
    const double p_minus = exact_marginal(model, pair.ctx_minus, cap);
    const auto gp = exact_grad_marginal(model, pair.ctx_plus, cap);
    const auto gm = exact_grad_marginal(model, pair.ctx_minus, cap);
    const double coeff = -p_minus / (p_plus + p_minus);
    ParamVector g(model.param_count(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = coeff * (gp[i] / p_plus - gm[i] / p_minus);
    }
    return g;
}

std::vector<double> self_normalized_weights(const std::vector<double>& answer_probs) {
    if (answer_probs.empty()) throw std::invalid_argument("empty answer_probs");
    double sum = 0.0;
    for (double p : answer_probs) sum += p;
    std::vector<double> w(answer_probs.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = answer_probs[i] / sum;
    return w;
}

double misalignment_weight(const ThoughtGroup& group_plus, const ThoughtGroup& group_minus) {
    if (group_plus.size() == 0 || group_minus.size() == 0) {
        throw std::invalid_argument("misalignment_weight requires non-empty groups");
    }
    const double sp = group_plus.prob_sum();
    const double sm = group_minus.prob_sum();
    return sm / (sp + sm);
}

ThoughtGroup make_thought_group(const GpmModel& model, const FeatureVector& ctx,
                                std::vector<Thought> thoughts) {
    ThoughtGroup g;
    g.thoughts = std::move(thoughts);
    const std::size_t n = g.thoughts.size();
    g.answer_probs.reserve(n);
    for (const Thought& th : g.thoughts) {
        g.answer_probs.push_back(answer_prob(model, ctx, th.tokens));
    }
    g.norm_weights = self_normalized_weights(g.answer_probs);
    g.advantages.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        g.advantages[i] = g.norm_weights[i] - 1.0 / static_cast<double>(n);
    }
    return g;
}

DualWeights make_dual_weights(const GpmModel& model, const PreferencePair& pair, int n, Rng rng) {
    DualWeights dw;
    dw.group_plus = make_thought_group(model, pair.ctx_plus,
                                       sample_thoughts(model, pair.ctx_plus, n, rng.child(0)));
    dw.group_minus = make_thought_group(model, pair.ctx_minus,
                                        sample_thoughts(model, pair.ctx_minus, n, rng.child(1)));
    dw.misalignment = misalignment_weight(dw.group_plus, dw.group_minus);
    return dw;
}

ParamVector dwrl_gradient_estimate(const GpmModel& model, const PreferencePair& pair,
                                   const ThoughtGroup& group_plus,
                                   const ThoughtGroup& group_minus) {
    const double p_hat = misalignment_weight(group_plus, group_minus);
    ParamVector g(model.param_count(), 0.0);
    for (std::size_t i = 0; i < group_plus.size(); ++i) {
        const Thought& th = group_plus.thoughts[i];
        accumulate_grad_log_answer_prob(model, pair.ctx_plus, th.tokens,
                                        -p_hat * group_plus.norm_weights[i], g);
        accumulate_grad_log_thought_prob(model, pair.ctx_plus, th.tokens,
                                         -p_hat * group_plus.advantages[i], g);
    }
    for (std::size_t i = 0; i < group_minus.size(); ++i) {
        const Thought& th = group_minus.thoughts[i];
        accumulate_grad_log_answer_prob(model, pair.ctx_minus, th.tokens,
                                        p_hat * group_minus.norm_weights[i], g);
        accumulate_grad_log_thought_prob(model, pair.ctx_minus, th.tokens,
                                         p_hat * group_minus.advantages[i], g);
    }
    return g;
}

std::vector<double> grpo_advantages(const std::vector<double>& rewards) {
    const std::size_t n = rewards.size();
    if (n < 2) throw std::invalid_argument("grpo_advantages requires at least 2 rewards");
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= static_cast<double>(n);
    std::vector<double> adv(n, 0.0);
    if (var == 0.0) return adv;
    const double sd = std::sqrt(var);
    for (std::size_t i = 0; i < n; ++i) adv[i] = (rewards[i] - mean) / sd;
    return adv;
}

double pairwise_reward(Verdict verdict, Verdict human_label) {
    return verdict == human_label ? 1.0 : 0.0;
}

double pointwise_reward(double s_plus, double s_minus) { return s_plus > s_minus ? 1.0 : 0.0; }

double grpo_clipped_objective(const std::vector<std::vector<double>>& ratios,
                              const std::vector<double>& advantages, double epsilon) {
    if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be > 0");
    if (ratios.size() != advantages.size()) {
        throw std::invalid_argument("ratios/advantages size mismatch");
    }
    double obj = 0.0;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        double token_sum = 0.0;
        for (double g : ratios[i]) {
            const double clipped = std::min(std::max(g, 1.0 - epsilon), 1.0 + epsilon);
            token_sum += std::min(g * advantages[i], clipped * advantages[i]);
        }
        obj += token_sum / static_cast<double>(ratios[i].size());
    }
    return obj / static_cast<double>(ratios.size());
}

}  // namespace dwrl
