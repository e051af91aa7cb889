// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "latentedit/denoiser.hpp"

namespace latentedit {

struct ToyDiTConfig {
    std::size_t channels = 3;
    std::size_t grid = 8;    // latent side length
    std::size_t patch = 1;   // latent pixels per token side
    std::size_t layers = 6;
    std::size_t heads = 4;
    std::size_t width = 64;
    std::size_t text_dim = kDefaultTextDim;
    std::size_t mlp_ratio = 2;
    std::uint64_t seed = 0;

    std::size_t tokens_per_side() const { return grid / patch; }
    std::size_t tokens() const { return tokens_per_side() * tokens_per_side(); }
    std::size_t patch_dim() const { return channels * patch * patch; }
    Tensor::Shape latent_shape() const { return {channels, grid, grid}; }
    void validate() const;
};

inline constexpr std::size_t kTimeFrequencies = 64;

/// Sinusoidal embedding of 1000 t with 64 geometric frequencies whose periods
/// span 1..1e4: [sin(w_k 1000 t)..., cos(w_k 1000 t)...].
Tensor timestep_embedding(double t);

/// Small untrained diffusion transformer with seeded weights.
///
/// Latent [C x G x G] is patchified into (G/p)^2 tokens. Each block applies
/// AdaLN-modulated self-attention, cross-attention over the prompt vectors,
/// and a GELU MLP, all residual. A final layer-normed linear head gives F, and
/// the prediction is x_0 = alpha_t x_t + sigma_t F: the posterior mean of
/// unit-variance data plus a noise-scaled network correction, so the model
/// tends to the identity as t -> 0 like a trained denoiser.
/// Self- and cross-attention expose their tensors through EvalContext hooks.
class ToyDiT final : public Denoiser {
public:
    explicit ToyDiT(ToyDiTConfig config, NoiseSchedule schedule = NoiseSchedule());

    Tensor evaluate(const Tensor& x_t, double t, const PromptEmbedding& prompt,
                    EvalContext* ctx = nullptr) const override;

    const ToyDiTConfig& config() const { return config_; }

    Tensor patchify(const Tensor& latent) const;
    Tensor unpatchify(const Tensor& tokens) const;

private:
    struct Block {
        Tensor w_mod;  // [2K x 4d]: shift/scale for attention and MLP inputs
        Tensor w_q, w_k, w_v, w_o;
        Tensor c_q, c_k, c_v, c_o;
        Tensor w_up, w_down;
    };

    Tensor self_attention(std::size_t layer, const Block& block, const Tensor& a, double t,
                          EvalContext& ctx) const;
    Tensor cross_attention(std::size_t layer, const Block& block, const Tensor& c, double t,
                           const PromptEmbedding& prompt, EvalContext& ctx) const;

    ToyDiTConfig config_;
    NoiseSchedule schedule_;
    Tensor w_in_;
    Tensor pos_;
    Tensor w_out_;
    std::vector<Block> blocks_;
};

}  // namespace latentedit
