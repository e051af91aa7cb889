// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "latentedit/attention.hpp"
#include "latentedit/patch_merging.hpp"
#include "latentedit/schedule.hpp"
#include "latentedit/tensor.hpp"

namespace latentedit {

/// Token ids plus one embedding row per token.
struct PromptEmbedding {
    std::vector<std::uint64_t> tokens;
    std::vector<std::string> words;
    Tensor vectors;  // [num_tokens x text_dim]

    std::size_t size() const { return tokens.size(); }
    std::size_t text_dim() const { return vectors.dim(1); }

    /// Single all-zero token used as the null condition for guidance.
    static PromptEmbedding unconditional(std::size_t text_dim);
};

inline constexpr std::size_t kDefaultTextDim = 32;

/// 64-bit FNV-1a.
std::uint64_t token_hash(std::string_view token);

/// Whitespace tokenizer with hash-keyed Gaussian token vectors. Equal words
/// always map to equal vectors regardless of position or prompt.
PromptEmbedding encode_prompt(std::string_view text, std::size_t text_dim = kDefaultTextDim);

// ---------------------------------------------------------------------------
// Evaluation hooks

enum class TensorOrigin { own, source_cache };

/// Self-attention inputs of one layer, after any merge, before the kernel
/// runs. Hooks may replace q, k, v; the kernel consumes whatever is left.
struct SelfAttentionIO {
    std::size_t layer = 0;
    double t = 0.0;
    Tensor q, k, v;  // [H x N' x d/H]
    TensorOrigin q_origin = TensorOrigin::own;
    TensorOrigin k_origin = TensorOrigin::own;
    TensorOrigin v_origin = TensorOrigin::own;
};

/// Cross-attention probabilities [H x N x T] before they are applied to V.
struct CrossAttentionIO {
    std::size_t layer = 0;
    double t = 0.0;
    Tensor probs;
};

class AttentionHook {
public:
    virtual ~AttentionHook() = default;
    virtual void on_merge_plan(std::size_t /*layer*/, double /*t*/, MergePlan& /*plan*/) {}
    virtual void on_self_attention(SelfAttentionIO& /*io*/) {}
    virtual void on_cross_attention(CrossAttentionIO& /*io*/) {}
};

struct EvalStats {
    MacCounter attention;
    std::uint64_t tokens_in = 0;   // tokens entering self-attention, summed over layers
    std::uint64_t tokens_out = 0;  // tokens actually attended after merging
    std::uint64_t evaluations = 0;
};

/// Per-call evaluation state. Hooks run in registration order; nothing here
/// is shared between contexts, so concurrent evaluations do not interfere.
struct EvalContext {
    std::vector<AttentionHook*> hooks;
    MergeConfig merge{0.0, MergeSimilarity::key_cosine};
    EvalStats* stats = nullptr;
};

// ---------------------------------------------------------------------------
// Denoisers

/// Data-prediction model: (x_t, t, prompt) -> estimate of x_0, same shape as x_t.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual Tensor evaluate(const Tensor& x_t, double t, const PromptEmbedding& prompt,
                            EvalContext* ctx = nullptr) const = 0;
};

/// Returns a fixed tensor regardless of input.
class ConstantDenoiser final : public Denoiser {
public:
    explicit ConstantDenoiser(Tensor value) : value_(std::move(value)) {}
    Tensor evaluate(const Tensor& x_t, double t, const PromptEmbedding& prompt,
                    EvalContext* ctx = nullptr) const override;

private:
    Tensor value_;
};

/// Posterior mean E[x_0 | x_t] for x_0 ~ N(mu, gamma2 I):
///   (gamma2 alpha_t x_t + sigma_t^2 mu) / (alpha_t^2 gamma2 + sigma_t^2)
class AnalyticGaussianDenoiser final : public Denoiser {
public:
    AnalyticGaussianDenoiser(Tensor mu, double gamma2, NoiseSchedule schedule);

    Tensor evaluate(const Tensor& x_t, double t, const PromptEmbedding& prompt,
                    EvalContext* ctx = nullptr) const override;
    Tensor denoise(const Tensor& x_t, double t) const;

    const Tensor& mu() const { return mu_; }
    double gamma2() const { return gamma2_; }

    /// Exact probability-flow ODE map from (x_s, s) to time t for this prior.
    Tensor exact_flow(const Tensor& x_s, double s, double t) const;

private:
    Tensor mu_;
    double gamma2_;
    NoiseSchedule schedule_;
};

/// x_uncond + w (x_cond - x_uncond). w = 1 and w = 0 return the single
/// branch output untouched (and skip the other evaluation).
Tensor cfg_denoise(const Denoiser& model, const Tensor& x_t, double t, const PromptEmbedding& cond,
                   const PromptEmbedding& uncond, double w, EvalContext* cond_ctx = nullptr,
                   EvalContext* uncond_ctx = nullptr);

/// Combination step of cfg_denoise on precomputed outputs.
Tensor cfg_combine(const Tensor& x_cond, const Tensor& x_uncond, double w);

}  // namespace latentedit
