// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "latentedit/attention_control.hpp"

#include <algorithm>
#include <limits>

#include "latentedit/errors.hpp"

namespace latentedit {

CrossMode parse_cross_mode(std::string_view name) {
    if (name == "replace") return CrossMode::replace;
    if (name == "refine") return CrossMode::refine;
    if (name == "off") return CrossMode::off;
    throw InvalidArgument("unknown cross-attention mode '" + std::string(name) + "'");
}

std::string_view to_string(CrossMode mode) {
    switch (mode) {
        case CrossMode::replace: return "replace";
        case CrossMode::refine: return "refine";
        case CrossMode::off: return "off";
    }
    return "?";
}

std::set<std::size_t> deep_layers(std::size_t layers) {
    std::set<std::size_t> out;
    for (std::size_t l = layers / 2; l < layers; ++l) out.insert(l);
    return out;
}

std::set<std::size_t> all_layers(std::size_t layers) {
    std::set<std::size_t> out;
    for (std::size_t l = 0; l < layers; ++l) out.insert(l);
    return out;
}

AttentionPolicy AttentionPolicy::defaults(const NoiseSchedule& schedule, std::size_t layers) {
    AttentionPolicy p;
    p.s_threshold = 0.6 * schedule.t_max();
    p.self_layers = deep_layers(layers);
    p.cross_mode = CrossMode::refine;
    p.cross_until = 0.5 * schedule.t_max();
    return p;
}

void AttentionPolicy::validate(const NoiseSchedule& schedule, std::size_t layers) const {
    if (!(s_threshold >= schedule.t_min() && s_threshold <= schedule.t_max())) {
        throw InvalidArgument("s_threshold must lie in [t_min, t_max]");
    }
    if (!self_layers.empty() && *self_layers.rbegin() >= layers) {
        throw InvalidArgument("self_layers references a layer beyond the model depth");
    }
}

QuerySource select_query(double t, const AttentionPolicy& policy) {
    return t > policy.s_threshold ? QuerySource::source : QuerySource::target;
}

// ---------------------------------------------------------------------------

void BranchCache::store_self(const CacheKey& key, SelfAttentionEntry entry) {
    if (!self_.emplace(key, std::move(entry)).second) {
        throw InvalidArgument("branch cache: self-attention entry written twice");
    }
}

void BranchCache::store_cross(const CacheKey& key, Tensor probs) {
    if (!cross_.emplace(key, std::move(probs)).second) {
        throw InvalidArgument("branch cache: cross-attention entry written twice");
    }
}

const SelfAttentionEntry& BranchCache::self_entry(const CacheKey& key) const {
    auto it = self_.find(key);
    if (it == self_.end()) {
        throw CacheMiss("no source self-attention entry for step " + std::to_string(key.step) + ", layer " +
                        std::to_string(key.layer));
    }
    return it->second;
}

const Tensor& BranchCache::cross_entry(const CacheKey& key) const {
    auto it = cross_.find(key);
    if (it == cross_.end()) {
        throw CacheMiss("no source cross-attention entry for step " + std::to_string(key.step) + ", layer " +
                        std::to_string(key.layer));
    }
    return it->second;
}

void BranchCache::evict_before(std::size_t step) {
    std::erase_if(self_, [step](const auto& kv) { return kv.first.step < step; });
    std::erase_if(cross_, [step](const auto& kv) { return kv.first.step < step; });
}

Tensor mutual_self_attention(double t, const CacheKey& key, const Tensor& q_tar, const BranchCache& cache,
                             const AttentionPolicy& policy) {
    const SelfAttentionEntry& src = cache.self_entry(key);
    const Tensor& q = select_query(t, policy) == QuerySource::source ? src.q : q_tar;
    return attention(q, src.k, src.v);
}

// ---------------------------------------------------------------------------

std::size_t TokenAlignment::mapped_count() const {
    return static_cast<std::size_t>(
        std::count_if(target_to_source.begin(), target_to_source.end(), [](const auto& m) { return m.has_value(); }));
}

void TokenAlignment::validate() const {
    std::vector<bool> used(source_tokens, false);
    for (const auto& m : target_to_source) {
        if (!m) continue;
        if (*m >= source_tokens) throw InvalidAlignment("alignment references source token " + std::to_string(*m));
        if (used[*m]) throw InvalidAlignment("alignment maps two target tokens to one source token");
        used[*m] = true;
    }
}

TokenAlignment align_tokens(const PromptEmbedding& source, const PromptEmbedding& target) {
    const std::size_t n = source.size(), m = target.size();
    // lcs[i][j]: LCS length of source[i..] and target[j..].
    std::vector<std::vector<std::size_t>> lcs(n + 1, std::vector<std::size_t>(m + 1, 0));
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t j = m; j-- > 0;) {
            lcs[i][j] = source.tokens[i] == target.tokens[j] ? lcs[i + 1][j + 1] + 1
                                                             : std::max(lcs[i + 1][j], lcs[i][j + 1]);
        }
    }
    TokenAlignment out;
    out.source_tokens = n;
    out.target_to_source.assign(m, std::nullopt);
    std::size_t i = 0, j = 0;
    while (i < n && j < m) {
        if (source.tokens[i] == target.tokens[j] && lcs[i][j] == lcs[i + 1][j + 1] + 1) {
            out.target_to_source[j] = i;
            ++i;
            ++j;
        } else if (lcs[i + 1][j] >= lcs[i][j + 1]) {
            ++i;
        } else {
            ++j;
        }
    }
    return out;
}

Tensor cross_attention_control(double t, const Tensor& target_map, const Tensor& source_map,
                               const TokenAlignment& alignment, const AttentionPolicy& policy) {
    if (target_map.rank() != 2 || source_map.rank() != 2 || target_map.dim(0) != source_map.dim(0)) {
        throw InvalidShape("cross-attention maps must be [N_patches x N_tokens] with equal patch counts");
    }
    const std::size_t n_tar = target_map.dim(1), n_src = source_map.dim(1);
    if (alignment.target_to_source.size() != n_tar || alignment.source_tokens != n_src) {
        throw InvalidAlignment("alignment does not match the prompt lengths of the maps");
    }
    alignment.validate();
    if (policy.cross_mode == CrossMode::off || t <= policy.cross_until) return target_map;

    std::vector<std::optional<std::size_t>> column_source(n_tar);
    for (std::size_t j = 0; j < n_tar; ++j) {
        if (alignment.target_to_source[j]) {
            column_source[j] = alignment.target_to_source[j];
        } else if (policy.cross_mode == CrossMode::replace && n_src == n_tar) {
            column_source[j] = j;
        }
    }

    // Every column copied from a distinct source column: rows are permutations
    // of source rows and already sum to 1.
    bool full_copy = n_src == n_tar;
    std::vector<bool> used(n_src, false);
    for (const auto& c : column_source) {
        if (!c || used[*c]) {
            full_copy = false;
            break;
        }
        used[*c] = true;
    }

    Tensor out = target_map;
    for (std::size_t r = 0; r < out.dim(0); ++r) {
        auto row = out.row(r);
        bool changed = false;
        for (std::size_t j = 0; j < n_tar; ++j) {
            if (!column_source[j]) continue;
            const double v = source_map(r, *column_source[j]);
            if (v != row[j]) {
                row[j] = v;
                changed = true;
            }
        }
        if (!changed || full_copy) continue;
        double sum = 0.0;
        for (double v : row) sum += v;
        if (sum > 0.0) {
            for (double& v : row) v /= sum;
        } else {
            for (double& v : row) v = 1.0 / static_cast<double>(n_tar);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

void SourceRecorder::on_merge_plan(std::size_t layer, double, MergePlan& plan) {
    if (policy_.controls(layer)) pending_plan_ = plan;
}

void SourceRecorder::on_self_attention(SelfAttentionIO& io) {
    if (!policy_.controls(io.layer)) return;
    SelfAttentionEntry entry{io.q, io.k, io.v,
                             pending_plan_ ? std::move(*pending_plan_) : MergePlan::identity(io.q.dim(1))};
    pending_plan_.reset();
    cache_.store_self(cursor_.key(io.layer), std::move(entry));
}

// Map edits only touch the conditional pass; both branches share the null prompt.
void SourceRecorder::on_cross_attention(CrossAttentionIO& io) {
    if (cursor_.pass != BranchPass::cond || policy_.cross_mode == CrossMode::off || io.t <= policy_.cross_until) {
        return;
    }
    cache_.store_cross(cursor_.key(io.layer), io.probs);
}

void TargetController::on_merge_plan(std::size_t layer, double, MergePlan& plan) {
    if (!policy_.controls(layer)) return;
    plan = cache_.self_entry(cursor_.key(layer)).plan;
}

void TargetController::on_self_attention(SelfAttentionIO& io) {
    if (!policy_.controls(io.layer)) return;
    const SelfAttentionEntry& src = cache_.self_entry(cursor_.key(io.layer));
    const QuerySource which = select_query(io.t, policy_);
    decisions_.emplace(std::make_pair(cursor_.step, io.layer), which);
    if (which == QuerySource::source) {
        io.q = src.q;
        io.q_origin = TensorOrigin::source_cache;
    }
    io.k = src.k;
    io.v = src.v;
    io.k_origin = TensorOrigin::source_cache;
    io.v_origin = TensorOrigin::source_cache;
}

void TargetController::on_cross_attention(CrossAttentionIO& io) {
    if (cursor_.pass != BranchPass::cond || policy_.cross_mode == CrossMode::off || io.t <= policy_.cross_until) {
        return;
    }
    const Tensor& src = cache_.cross_entry(cursor_.key(io.layer));
    if (src.dim(0) != io.probs.dim(0) || src.dim(1) != io.probs.dim(1)) {
        throw InvalidShape("cross-attention control: source and target maps differ in heads or patches");
    }
    for (std::size_t h = 0; h < io.probs.dim(0); ++h) {
        const Tensor edited = cross_attention_control(io.t, head_slice(io.probs, h), head_slice(src, h), alignment_, policy_);
        std::copy(edited.data().begin(), edited.data().end(), io.probs.row(h).begin());
    }
}

std::size_t TargetController::source_query_uses() const {
    return static_cast<std::size_t>(std::count_if(decisions_.begin(), decisions_.end(),
                                                  [](const auto& kv) { return kv.second == QuerySource::source; }));
}

std::size_t TargetController::target_query_uses() const { return decisions_.size() - source_query_uses(); }

void ProvenanceAudit::on_self_attention(SelfAttentionIO& io) {
    if (!policy_.controls(io.layer)) return;
    ++checks_;
    const SelfAttentionEntry& src = cache_.self_entry(cursor_.key(io.layer));
    const bool ok = io.k_origin == TensorOrigin::source_cache && io.v_origin == TensorOrigin::source_cache &&
                    io.k == src.k && io.v == src.v;
    if (!ok) ++violations_;
}

// ---------------------------------------------------------------------------

namespace {

Tensor guided_eval(const Denoiser& model, const Tensor& x, double t, const PromptEmbedding& cond,
                   const PromptEmbedding& uncond, double w, EvalContext& ctx, BranchCursor& cursor) {
    if (!(w >= 0.0)) throw InvalidArgument("guidance weight must be non-negative");
    std::optional<Tensor> out_c, out_u;
    if (w != 0.0) {
        cursor.pass = BranchPass::cond;
        out_c = model.evaluate(x, t, cond, &ctx);
    }
    if (w != 1.0) {
        cursor.pass = BranchPass::uncond;
        out_u = model.evaluate(x, t, uncond, &ctx);
    }
    if (!out_c) return *out_u;
    if (!out_u) return *out_c;
    return cfg_combine(*out_c, *out_u, w);
}

}  // namespace

DualBranchResult run_dual_branch(const Tensor& x_T_src, const Tensor& x_T_tar, const TimestepGrid& grid,
                                 const Denoiser& model, const AttentionPolicy& policy,
                                 const DualBranchPrompts& prompts, const DualBranchOptions& options) {
    if (!x_T_src.same_shape(x_T_tar)) throw InvalidShape("dual-branch run: start latents differ in shape");
    if (options.solver == SolverKind::rk4_oracle) throw InvalidArgument("dual-branch run needs a grid solver");
    policy.validate(grid.schedule(), std::numeric_limits<std::size_t>::max());

    BranchCache cache;
    BranchCursor cursor;
    SourceRecorder recorder(cache, cursor, policy);
    TargetController controller(cache, cursor, policy, align_tokens(prompts.source, prompts.target));
    ProvenanceAudit audit(cache, cursor, policy);

    DualBranchResult result;
    EvalContext src_ctx{{&recorder}, options.merge, &result.stats};
    src_ctx.hooks.insert(src_ctx.hooks.end(), options.source_hooks.begin(), options.source_hooks.end());
    EvalContext tar_ctx{options.target_before, options.merge, &result.stats};
    tar_ctx.hooks.push_back(&controller);
    tar_ctx.hooks.push_back(&audit);
    tar_ctx.hooks.insert(tar_ctx.hooks.end(), options.target_after.begin(), options.target_after.end());

    SolverState src{x_T_src, 0, {}};
    SolverState tar{x_T_tar, 0, {}};
    for (std::size_t i = 0; i < grid.steps(); ++i) {
        const double t = grid.t(i);
        cursor.step = i;
        Tensor d_src = guided_eval(model, src.x, t, prompts.source, prompts.uncond, options.guidance, src_ctx, cursor);
        src = advance(std::move(src), grid, std::move(d_src), options.solver);
        if (options.run_target) {
            Tensor d_tar =
                guided_eval(model, tar.x, t, prompts.target, prompts.uncond, options.guidance, tar_ctx, cursor);
            tar = advance(std::move(tar), grid, std::move(d_tar), options.solver);
        }
        cache.evict_before(i + 1);
    }
    result.x0_src = std::move(src.x);
    result.x0_tar = options.run_target ? std::move(tar.x) : Tensor{};
    result.q_src_uses = controller.source_query_uses();
    result.q_tar_uses = controller.target_query_uses();
    result.kv_checks = audit.checks();
    result.kv_violations = audit.violations();
    return result;
}

}  // namespace latentedit
