// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "latentedit/toy_dit.hpp"

#include <cmath>

#include "latentedit/errors.hpp"
#include "latentedit/rng.hpp"

namespace latentedit {

namespace {

Tensor init_weight(Rng& rng, std::size_t fan_in, std::size_t fan_out, double gain = 1.0) {
    Tensor w = gaussian({fan_in, fan_out}, rng);
    w *= gain / std::sqrt(static_cast<double>(fan_in));
    return w;
}

double gelu(double x) {
    constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
    return 0.5 * x * (1.0 + std::tanh(kC * (x + 0.044715 * x * x * x)));
}

// x * (1 + scale) + shift, row-broadcast of the [1 x 4d] modulation slice at offset.
Tensor modulate(const Tensor& x, const Tensor& mod, std::size_t shift_off, std::size_t scale_off) {
    Tensor out = x;
    const std::size_t d = x.dim(1);
    for (std::size_t r = 0; r < x.dim(0); ++r) {
        auto row = out.row(r);
        for (std::size_t c = 0; c < d; ++c) row[c] = row[c] * (1.0 + mod[scale_off + c]) + mod[shift_off + c];
    }
    return out;
}

}  // namespace

void ToyDiTConfig::validate() const {
    if (channels == 0 || grid == 0 || patch == 0 || layers == 0 || heads == 0 || width == 0 || text_dim == 0 ||
        mlp_ratio == 0) {
        throw InvalidArgument("toy DiT: all dimensions must be positive");
    }
    if (grid % patch != 0) throw InvalidArgument("toy DiT: grid must be divisible by patch size");
    if (width % heads != 0) throw InvalidArgument("toy DiT: width must be divisible by heads");
}

Tensor timestep_embedding(double t) {
    Tensor emb({1, 2 * kTimeFrequencies});
    const double arg = 1000.0 * t;
    for (std::size_t k = 0; k < kTimeFrequencies; ++k) {
        const double freq =
            std::pow(10000.0, -static_cast<double>(k) / static_cast<double>(kTimeFrequencies - 1));
        emb[k] = std::sin(freq * arg);
        emb[kTimeFrequencies + k] = std::cos(freq * arg);
    }
    return emb;
}

ToyDiT::ToyDiT(ToyDiTConfig config, NoiseSchedule schedule) : config_(config), schedule_(std::move(schedule)) {
    config_.validate();
    Rng rng(config_.seed);
    const std::size_t d = config_.width;
    const std::size_t hidden = config_.mlp_ratio * d;
    w_in_ = init_weight(rng, config_.patch_dim(), d);
    pos_ = gaussian({config_.tokens(), d}, rng);
    pos_ *= 0.5;
    for (std::size_t l = 0; l < config_.layers; ++l) {
        Block b;
        b.w_mod = init_weight(rng, 2 * kTimeFrequencies, 4 * d, 0.1);
        b.w_q = init_weight(rng, d, d);
        b.w_k = init_weight(rng, d, d);
        b.w_v = init_weight(rng, d, d);
        b.w_o = init_weight(rng, d, d, 0.5);
        b.c_q = init_weight(rng, d, d);
        b.c_k = init_weight(rng, config_.text_dim, d);
        b.c_v = init_weight(rng, config_.text_dim, d);
        b.c_o = init_weight(rng, d, d, 0.5);
        b.w_up = init_weight(rng, d, hidden);
        b.w_down = init_weight(rng, hidden, d, 0.5);
        blocks_.push_back(std::move(b));
    }
    w_out_ = init_weight(rng, d, config_.patch_dim(), 0.3);
}

Tensor ToyDiT::patchify(const Tensor& latent) const {
    if (latent.shape() != config_.latent_shape()) {
        throw InvalidShape("toy DiT: expected latent " + shape_string(config_.latent_shape()) + ", got " +
                           shape_string(latent.shape()));
    }
    const std::size_t g = config_.grid, p = config_.patch, side = config_.tokens_per_side();
    Tensor tokens({config_.tokens(), config_.patch_dim()});
    for (std::size_t ty = 0; ty < side; ++ty)
        for (std::size_t tx = 0; tx < side; ++tx)
            for (std::size_t c = 0; c < config_.channels; ++c)
                for (std::size_t py = 0; py < p; ++py)
                    for (std::size_t px = 0; px < p; ++px)
                        tokens(ty * side + tx, (c * p + py) * p + px) =
                            latent[(c * g + ty * p + py) * g + tx * p + px];
    return tokens;
}

Tensor ToyDiT::unpatchify(const Tensor& tokens) const {
    const std::size_t g = config_.grid, p = config_.patch, side = config_.tokens_per_side();
    Tensor latent(config_.latent_shape());
    for (std::size_t ty = 0; ty < side; ++ty)
        for (std::size_t tx = 0; tx < side; ++tx)
            for (std::size_t c = 0; c < config_.channels; ++c)
                for (std::size_t py = 0; py < p; ++py)
                    for (std::size_t px = 0; px < p; ++px)
                        latent[(c * g + ty * p + py) * g + tx * p + px] =
                            tokens(ty * side + tx, (c * p + py) * p + px);
    return latent;
}

Tensor ToyDiT::self_attention(std::size_t layer, const Block& block, const Tensor& a, double t,
                              EvalContext& ctx) const {
    const std::size_t heads = config_.heads;
    MacCounter* cost = ctx.stats ? &ctx.stats->attention : nullptr;

    MergePlan plan = MergePlan::identity(a.dim(0));
    if (ctx.merge.merged_pairs(a.dim(0)) > 0) {
        const Tensor& w_sim = ctx.merge.similarity == MergeSimilarity::key_cosine ? block.w_k : block.w_v;
        plan = build_plan(head_mean_features(matmul(a, w_sim), heads), ctx.merge, cost);
    }
    for (auto* hook : ctx.hooks) hook->on_merge_plan(layer, t, plan);
    if (plan.n_tokens() != a.dim(0)) throw InvalidShape("toy DiT: hook installed a plan for the wrong token count");

    const Tensor am = merge(a, plan);
    SelfAttentionIO io;
    io.layer = layer;
    io.t = t;
    io.q = split_heads(matmul(am, block.w_q), heads);
    io.k = split_heads(matmul(am, block.w_k), heads);
    io.v = split_heads(matmul(am, block.w_v), heads);
    for (auto* hook : ctx.hooks) hook->on_self_attention(io);
    if (io.q.dim(1) != plan.group_count()) {
        throw InvalidShape("toy DiT: query count does not match the merge plan");
    }
    if (ctx.stats) {
        ctx.stats->tokens_in += a.dim(0);
        ctx.stats->tokens_out += plan.group_count();
    }
    const Tensor attended = matmul(merge_heads(attention(io.q, io.k, io.v, cost)), block.w_o);
    return unmerge(attended, plan);
}

Tensor ToyDiT::cross_attention(std::size_t layer, const Block& block, const Tensor& c, double t,
                               const PromptEmbedding& prompt, EvalContext& ctx) const {
    if (prompt.vectors.rank() != 2 || prompt.text_dim() != config_.text_dim) {
        throw InvalidShape("toy DiT: prompt embedding width does not match text_dim");
    }
    const std::size_t heads = config_.heads;
    MacCounter* cost = ctx.stats ? &ctx.stats->attention : nullptr;
    const Tensor q = split_heads(matmul(c, block.c_q), heads);
    const Tensor k = split_heads(matmul(prompt.vectors, block.c_k), heads);
    const Tensor v = split_heads(matmul(prompt.vectors, block.c_v), heads);

    CrossAttentionIO io;
    io.layer = layer;
    io.t = t;
    io.probs = attention_probs(q, k, cost);
    const auto expected = io.probs.shape();
    for (auto* hook : ctx.hooks) hook->on_cross_attention(io);
    if (io.probs.shape() != expected) throw InvalidShape("toy DiT: hook changed the cross-attention map shape");
    return matmul(merge_heads(apply_attention(io.probs, v, cost)), block.c_o);
}

Tensor ToyDiT::evaluate(const Tensor& x_t, double t, const PromptEmbedding& prompt, EvalContext* ctx) const {
    EvalContext local;
    EvalContext& context = ctx ? *ctx : local;
    if (context.stats) ++context.stats->evaluations;

    const std::size_t d = config_.width;
    Tensor h = matmul(patchify(x_t), w_in_);
    h += pos_;
    const Tensor temb = timestep_embedding(t);

    for (std::size_t l = 0; l < blocks_.size(); ++l) {
        const Block& b = blocks_[l];
        const Tensor mod = matmul(temb, b.w_mod);

        h += self_attention(l, b, modulate(layer_norm_rows(h), mod, 0, d), t, context);
        h += cross_attention(l, b, layer_norm_rows(h), t, prompt, context);

        Tensor up = matmul(modulate(layer_norm_rows(h), mod, 2 * d, 3 * d), b.w_up);
        for (double& v : up.data()) v = gelu(v);
        h += matmul(up, b.w_down);
    }
    return lincomb(schedule_.alpha(t), x_t, schedule_.sigma(t), unpatchify(matmul(layer_norm_rows(h), w_out_)));
}

}  // namespace latentedit
