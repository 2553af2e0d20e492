#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dwrl/rng.hpp"

namespace dwrl {

// Numeric context for one (prompt, response) pair. Layout: V signal channels
// followed by V cue channels (d = 2V for generated tasks).
using FeatureVector = std::vector<double>;

// Flat parameter state; see GpmModel for the (A, B, theta) index map.
using ParamVector = std::vector<double>;

struct Thought {
    std::vector<int> tokens;  // length T, each in [0, V)
    double logprob = 0.0;     // log prob of the sequence under the sampling policy
};

inline constexpr double kProbFloor = 1e-12;
inline constexpr std::size_t kDefaultEnumCap = 65536;

inline double clamp_prob(double p) {
    if (p < kProbFloor) return kProbFloor;
    if (p > 1.0 - kProbFloor) return 1.0 - kProbFloor;
    return p;
}

// Toy generative preference model: an autoregressive thought policy over V
// tokens of fixed length T, plus a thought-gated sigmoid answer head.
//
// Policy step logits:  z = A * ctx + B * c(prefix), where c is the prefix
// token-frequency vector divided by T.
// Answer head logit:   s = theta0 + sum_k theta[k+1] * g_k(o) * ctx[k], where
// g_k(o) is the frequency of token k in the thought divided by T.
//
// Parameters are stored flat: A (V x d, row-major), then B (V x V, row-major),
// then theta (V + 1 entries, bias first).
struct GpmModel {
    int V = 0;
    int T = 0;
    int d = 0;
    ParamVector params;

    GpmModel() = default;
    GpmModel(int V_, int T_, int d_) : V(V_), T(T_), d(d_), params(param_count(V_, d_), 0.0) {}

    static std::size_t param_count(int V, int d) {
        return static_cast<std::size_t>(V) * d + static_cast<std::size_t>(V) * V + V + 1;
    }
    std::size_t param_count() const { return param_count(V, d); }

    std::size_t a_index(int v, int k) const { return static_cast<std::size_t>(v) * d + k; }
    std::size_t b_index(int v, int u) const {
        return static_cast<std::size_t>(V) * d + static_cast<std::size_t>(v) * V + u;
    }
    std::size_t theta_index(int k) const {  // k = 0 is the bias
        return static_cast<std::size_t>(V) * d + static_cast<std::size_t>(V) * V + k;
    }

    double a(int v, int k) const { return params[a_index(v, k)]; }
    double b(int v, int u) const { return params[b_index(v, u)]; }
    double theta(int k) const { return params[theta_index(k)]; }

    void randomize(double scale, Rng& rng) {
        for (double& p : params) p = scale * rng.normal();
    }
};

// Step logits z = A*ctx + B*c(prefix) for the next token after `prefix`.
// Throws std::invalid_argument on ctx/model dimension mismatch.
std::vector<double> thought_step_logits(const GpmModel& model, const FeatureVector& ctx,
                                        std::span<const int> prefix);

// log pi(o | ctx) summed over the T autoregressive steps. <= 0.
double thought_logprob(const GpmModel& model, const FeatureVector& ctx,
                       std::span<const int> tokens);

// n i.i.d. ancestral samples; each Thought carries its exact logprob.
std::vector<Thought> sample_thoughts(const GpmModel& model, const FeatureVector& ctx, int n,
                                     Rng rng);

// Greedy decode: argmax token per step, ties broken toward the lowest id.
Thought greedy_thought(const GpmModel& model, const FeatureVector& ctx);

// Answer-head logit s for a complete thought.
double answer_logit(const GpmModel& model, const FeatureVector& ctx, std::span<const int> tokens);

// sigmoid(answer_logit), clamped to [1e-12, 1 - 1e-12].
double answer_prob(const GpmModel& model, const FeatureVector& ctx, std::span<const int> tokens);

// Analytic gradient of thought_logprob w.r.t. the flat parameters.
// The theta block is exactly zero.
ParamVector grad_log_thought_prob(const GpmModel& model, const FeatureVector& ctx,
                                  std::span<const int> tokens);
void accumulate_grad_log_thought_prob(const GpmModel& model, const FeatureVector& ctx,
                                      std::span<const int> tokens, double coeff, ParamVector& out);

// Analytic gradient of log answer_prob (unclamped sigmoid). The (A, B) blocks
// are exactly zero.
ParamVector grad_log_answer_prob(const GpmModel& model, const FeatureVector& ctx,
                                 std::span<const int> tokens);
void accumulate_grad_log_answer_prob(const GpmModel& model, const FeatureVector& ctx,
                                     std::span<const int> tokens, double coeff, ParamVector& out);

// Gradient of the raw answer-head logit s (theta block only).
void accumulate_grad_answer_logit(const GpmModel& model, const FeatureVector& ctx,
                                  std::span<const int> tokens, double coeff, ParamVector& out);

// All V^T token sequences in lexicographic order.
// Throws std::domain_error when V^T exceeds `cap`.
std::vector<std::vector<int>> enumerate_thoughts(int V, int T, std::size_t cap = kDefaultEnumCap);

// Number of thoughts V^T, guarded by the same cap.
std::size_t thought_space_size(int V, int T, std::size_t cap = kDefaultEnumCap);

// Depth-first walk over the full thought space sharing prefix computations.
// Calls fn(tokens, logprob) once per thought, in lexicographic order.
void for_each_thought(const GpmModel& model, const FeatureVector& ctx,
                      const std::function<void(std::span<const int>, double)>& fn,
                      std::size_t cap = kDefaultEnumCap);

// log softmax of `logits` evaluated at index `idx` (max-shifted).
double log_softmax_at(std::span<const double> logits, int idx);

// Normalized softmax probabilities.
std::vector<double> softmax(std::span<const double> logits);

}  // namespace dwrl
