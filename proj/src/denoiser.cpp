// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "latentedit/denoiser.hpp"

#include <cmath>
#include <sstream>

#include "latentedit/errors.hpp"
#include "latentedit/rng.hpp"

namespace latentedit {

PromptEmbedding PromptEmbedding::unconditional(std::size_t text_dim) {
    PromptEmbedding p;
    p.tokens = {0};
    p.words = {""};
    p.vectors = Tensor({1, text_dim});
    return p;
}

std::uint64_t token_hash(std::string_view token) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : token) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

PromptEmbedding encode_prompt(std::string_view text, std::size_t text_dim) {
    if (text_dim == 0) throw InvalidArgument("text_dim must be positive");
    PromptEmbedding p;
    std::istringstream in{std::string(text)};
    std::string word;
    while (in >> word) {
        p.tokens.push_back(token_hash(word));
        p.words.push_back(word);
    }
    if (p.tokens.empty()) throw InvalidArgument("prompt must contain at least one token");
    p.vectors = Tensor({p.tokens.size(), text_dim});
    for (std::size_t i = 0; i < p.tokens.size(); ++i) {
        Rng rng(p.tokens[i]);
        for (double& v : p.vectors.row(i)) v = rng.normal();
    }
    return p;
}

Tensor ConstantDenoiser::evaluate(const Tensor& x_t, double, const PromptEmbedding&, EvalContext* ctx) const {
    if (!x_t.same_shape(value_)) throw InvalidShape("constant denoiser: shape mismatch");
    if (ctx && ctx->stats) ++ctx->stats->evaluations;
    return value_;
}

AnalyticGaussianDenoiser::AnalyticGaussianDenoiser(Tensor mu, double gamma2, NoiseSchedule schedule)
    : mu_(std::move(mu)), gamma2_(gamma2), schedule_(schedule) {
    if (!(gamma2_ > 0.0)) throw InvalidArgument("gamma2 must be positive");
}

Tensor AnalyticGaussianDenoiser::denoise(const Tensor& x_t, double t) const {
    if (!x_t.same_shape(mu_)) throw InvalidShape("analytic denoiser: shape mismatch");
    const double a = schedule_.alpha(t);
    const double s = schedule_.sigma(t);
    const double denom = a * a * gamma2_ + s * s;
    return lincomb(gamma2_ * a / denom, x_t, s * s / denom, mu_);
}

Tensor AnalyticGaussianDenoiser::evaluate(const Tensor& x_t, double t, const PromptEmbedding&,
                                          EvalContext* ctx) const {
    if (ctx && ctx->stats) ++ctx->stats->evaluations;
    return denoise(x_t, t);
}

Tensor AnalyticGaussianDenoiser::exact_flow(const Tensor& x_s, double s, double t) const {
    // The marginal at every t is N(alpha mu, (alpha^2 gamma2 + sigma^2) I) and the
    // flow preserves the standardized coordinate.
    auto spread = [&](double tau) {
        const double a = schedule_.alpha(tau);
        const double sg = schedule_.sigma(tau);
        return std::sqrt(a * a * gamma2_ + sg * sg);
    };
    const double ratio = spread(t) / spread(s);
    Tensor out = lincomb(ratio, x_s, schedule_.alpha(t) - ratio * schedule_.alpha(s), mu_);
    return out;
}

Tensor cfg_combine(const Tensor& x_cond, const Tensor& x_uncond, double w) {
    if (!(w >= 0.0)) throw InvalidArgument("guidance weight must be non-negative");
    if (w == 1.0) return x_cond;
    if (w == 0.0) return x_uncond;
    if (!x_cond.same_shape(x_uncond)) throw InvalidShape("cfg: branch shapes differ");
    Tensor out(x_cond.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x_uncond[i] + w * (x_cond[i] - x_uncond[i]);
    return out;
}

Tensor cfg_denoise(const Denoiser& model, const Tensor& x_t, double t, const PromptEmbedding& cond,
                   const PromptEmbedding& uncond, double w, EvalContext* cond_ctx, EvalContext* uncond_ctx) {
    if (!(w >= 0.0)) throw InvalidArgument("guidance weight must be non-negative");
    if (w == 1.0) return model.evaluate(x_t, t, cond, cond_ctx);
    if (w == 0.0) return model.evaluate(x_t, t, uncond, uncond_ctx);
    const Tensor x_c = model.evaluate(x_t, t, cond, cond_ctx);
    const Tensor x_u = model.evaluate(x_t, t, uncond, uncond_ctx);
    return cfg_combine(x_c, x_u, w);
}

}  // namespace latentedit
