#include "dwrl/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dwrl {

namespace {

void check_ctx(const GpmModel& model, const FeatureVector& ctx) {
    if (static_cast<int>(ctx.size()) != model.d) {
        throw std::invalid_argument("feature vector has dimension " +
                                    std::to_string(ctx.size()) + ", model expects " +
                                    std::to_string(model.d));
    }
}

void check_tokens(const GpmModel& model, std::span<const int> tokens) {
    if (static_cast<int>(tokens.size()) != model.T) {
        throw std::invalid_argument("thought has length " + std::to_string(tokens.size()) +
                                    ", model expects " + std::to_string(model.T));
    }
    for (int t : tokens) {
        if (t < 0 || t >= model.V) {
            throw std::invalid_argument("token id " + std::to_string(t) + " outside [0, " +
                                        std::to_string(model.V) + ")");
        }
    }
}

// token-frequency vector of `tokens`, divided by T
std::vector<double> freq_over_T(const GpmModel& model, std::span<const int> tokens) {
    std::vector<double> g(static_cast<std::size_t>(model.V), 0.0);
    for (int t : tokens) g[static_cast<std::size_t>(t)] += 1.0 / model.T;
    return g;
}

}  // namespace

double log_softmax_at(std::span<const double> logits, int idx) {
    double m = logits[0];
    for (double z : logits) m = std::max(m, z);
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - m);
    return logits[static_cast<std::size_t>(idx)] - m - std::log(sum);
}

std::vector<double> softmax(std::span<const double> logits) {
    double m = logits[0];
    for (double z : logits) m = std::max(m, z);
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        sum += p[i];
    }
    for (double& x : p) x /= sum;
    return p;
}

std::vector<double> thought_step_logits(const GpmModel& model, const FeatureVector& ctx,
                                        std::span<const int> prefix) {
    check_ctx(model, ctx);
    if (static_cast<int>(prefix.size()) >= model.T && model.T > 0) {
        throw std::invalid_argument("prefix length must be < T");
    }
    std::vector<double> c(static_cast<std::size_t>(model.V), 0.0);
    for (int t : prefix) {
        if (t < 0 || t >= model.V) throw std::invalid_argument("invalid token in prefix");
        c[static_cast<std::size_t>(t)] += 1.0 / model.T;
    }
    std::vector<double> z(static_cast<std::size_t>(model.V), 0.0);
    for (int v = 0; v < model.V; ++v) {
        double acc = 0.0;
        for (int k = 0; k < model.d; ++k) acc += model.a(v, k) * ctx[static_cast<std::size_t>(k)];
        for (int u = 0; u < model.V; ++u) acc += model.b(v, u) * c[static_cast<std::size_t>(u)];
        z[static_cast<std::size_t>(v)] = acc;
    }
    return z;
}

double thought_logprob(const GpmModel& model, const FeatureVector& ctx,
                       std::span<const int> tokens) {
    check_tokens(model, tokens);
    double lp = 0.0;
    for (int t = 0; t < model.T; ++t) {
        auto z = thought_step_logits(model, ctx, tokens.subspan(0, static_cast<std::size_t>(t)));
        lp += log_softmax_at(z, tokens[static_cast<std::size_t>(t)]);
    }
    return lp;
}

std::vector<Thought> sample_thoughts(const GpmModel& model, const FeatureVector& ctx, int n,
                                     Rng rng) {
    if (n < 1) throw std::invalid_argument("sample_thoughts requires n >= 1");
    check_ctx(model, ctx);
    std::vector<Thought> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Rng stream = rng.child(static_cast<std::uint64_t>(i));
        Thought th;
        th.tokens.reserve(static_cast<std::size_t>(model.T));
        for (int t = 0; t < model.T; ++t) {
            auto z = thought_step_logits(model, ctx, th.tokens);
            auto p = softmax(z);
            const int tok = static_cast<int>(stream.categorical(p));
            th.logprob += log_softmax_at(z, tok);
            th.tokens.push_back(tok);
        }
        out.push_back(std::move(th));
    }
    return out;
}

Thought greedy_thought(const GpmModel& model, const FeatureVector& ctx) {
    Thought th;
    th.tokens.reserve(static_cast<std::size_t>(model.T));
    for (int t = 0; t < model.T; ++t) {
        auto z = thought_step_logits(model, ctx, th.tokens);
        const auto it = std::max_element(z.begin(), z.end());
        const int tok = static_cast<int>(it - z.begin());
        th.logprob += log_softmax_at(z, tok);
        th.tokens.push_back(tok);
    }
    return th;
}

double answer_logit(const GpmModel& model, const FeatureVector& ctx, std::span<const int> tokens) {
    check_ctx(model, ctx);
    check_tokens(model, tokens);
    const auto g = freq_over_T(model, tokens);
    double s = model.theta(0);
    for (int k = 0; k < model.V; ++k) {
        s += model.theta(k + 1) * g[static_cast<std::size_t>(k)] * ctx[static_cast<std::size_t>(k)];
    }
    return s;
}

double answer_prob(const GpmModel& model, const FeatureVector& ctx, std::span<const int> tokens) {
    const double s = answer_logit(model, ctx, tokens);
    return clamp_prob(1.0 / (1.0 + std::exp(-s)));
}

void accumulate_grad_log_thought_prob(const GpmModel& model, const FeatureVector& ctx,
                                      std::span<const int> tokens, double coeff,
                                      ParamVector& out) {
    check_tokens(model, tokens);
    std::vector<double> c(static_cast<std::size_t>(model.V), 0.0);
    for (int t = 0; t < model.T; ++t) {
        auto z = thought_step_logits(model, ctx, tokens.subspan(0, static_cast<std::size_t>(t)));
        auto q = softmax(z);
        const int y = tokens[static_cast<std::size_t>(t)];
        for (int v = 0; v < model.V; ++v) {
            const double resid = (v == y ? 1.0 : 0.0) - q[static_cast<std::size_t>(v)];
            const double w = coeff * resid;
            for (int k = 0; k < model.d; ++k) {
                out[model.a_index(v, k)] += w * ctx[static_cast<std::size_t>(k)];
            }
            for (int u = 0; u < model.V; ++u) {
                out[model.b_index(v, u)] += w * c[static_cast<std::size_t>(u)];
            }
        }
        c[static_cast<std::size_t>(y)] += 1.0 / model.T;
    }
}

ParamVector grad_log_thought_prob(const GpmModel& model, const FeatureVector& ctx,
                                  std::span<const int> tokens) {
    ParamVector g(model.param_count(), 0.0);
    accumulate_grad_log_thought_prob(model, ctx, tokens, 1.0, g);
    return g;
}

void accumulate_grad_answer_logit(const GpmModel& model, const FeatureVector& ctx,
                                  std::span<const int> tokens, double coeff, ParamVector& out) {
    const auto g = freq_over_T(model, tokens);
    out[model.theta_index(0)] += coeff;
    for (int k = 0; k < model.V; ++k) {
        out[model.theta_index(k + 1)] +=
            coeff * g[static_cast<std::size_t>(k)] * ctx[static_cast<std::size_t>(k)];
    }
}

void accumulate_grad_log_answer_prob(const GpmModel& model, const FeatureVector& ctx,
                                     std::span<const int> tokens, double coeff,
                                     ParamVector& out) {
    const double s = answer_logit(model, ctx, tokens);
    const double p = 1.0 / (1.0 + std::exp(-s));
    // d log sigmoid(s) / ds = 1 - p
    accumulate_grad_answer_logit(model, ctx, tokens, coeff * (1.0 - p), out);
}

ParamVector grad_log_answer_prob(const GpmModel& model, const FeatureVector& ctx,
                                 std::span<const int> tokens) {
    ParamVector g(model.param_count(), 0.0);
    accumulate_grad_log_answer_prob(model, ctx, tokens, 1.0, g);
    return g;
}

std::size_t thought_space_size(int V, int T, std::size_t cap) {
    if (V < 1 || T < 0) throw std::invalid_argument("V >= 1 and T >= 0 required");
    std::size_t n = 1;
    for (int t = 0; t < T; ++t) {
        if (n > cap / static_cast<std::size_t>(V)) {
            throw std::domain_error("thought space V^T exceeds enumeration cap " +
                                    std::to_string(cap));
        }
        n *= static_cast<std::size_t>(V);
    }
    if (n > cap) throw std::domain_error("thought space V^T exceeds enumeration cap");
    return n;
}

std::vector<std::vector<int>> enumerate_thoughts(int V, int T, std::size_t cap) {
    const std::size_t n = thought_space_size(V, T, cap);
    std::vector<std::vector<int>> out;
    out.reserve(n);
    std::vector<int> cur(static_cast<std::size_t>(T), 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t rem = i;
        for (int t = T - 1; t >= 0; --t) {
            cur[static_cast<std::size_t>(t)] = static_cast<int>(rem % static_cast<std::size_t>(V));
            rem /= static_cast<std::size_t>(V);
        }
        out.push_back(cur);
    }
    return out;
}

void for_each_thought(const GpmModel& model, const FeatureVector& ctx,
                      const std::function<void(std::span<const int>, double)>& fn,
                      std::size_t cap) {
    thought_space_size(model.V, model.T, cap);
    check_ctx(model, ctx);
    std::vector<int> tokens;
    tokens.reserve(static_cast<std::size_t>(model.T));
    auto walk = [&](auto&& self, double lp) -> void {
        if (static_cast<int>(tokens.size()) == model.T) {
            fn(tokens, lp);
            return;
        }
        auto z = thought_step_logits(model, ctx, tokens);
        for (int v = 0; v < model.V; ++v) {
            tokens.push_back(v);
            self(self, lp + log_softmax_at(z, v));
            tokens.pop_back();
        }
    };
    walk(walk, 0.0);
}

}  // namespace dwrl
