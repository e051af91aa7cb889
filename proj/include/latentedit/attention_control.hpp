// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string_view>
#include <utility>
#include <vector>

#include "latentedit/denoiser.hpp"
#include "latentedit/samplers.hpp"

namespace latentedit {

enum class CrossMode { replace, refine, off };

CrossMode parse_cross_mode(std::string_view name);
std::string_view to_string(CrossMode mode);

std::set<std::size_t> deep_layers(std::size_t layers);
std::set<std::size_t> all_layers(std::size_t layers);

/// Which layers and timesteps the target branch borrows from the source.
///
/// Self-attention in self_layers always uses the source K and V; the query
/// is the source one while t > s_threshold and the target's own otherwise.
/// Cross-attention maps are edited while t > cross_until.
struct AttentionPolicy {
    double s_threshold = 0.6;
    std::set<std::size_t> self_layers;
    CrossMode cross_mode = CrossMode::refine;
    double cross_until = 0.5;

    /// S = 0.6 t_max, deeper half of the layers, refine until 0.5 t_max.
    static AttentionPolicy defaults(const NoiseSchedule& schedule, std::size_t layers);

    bool controls(std::size_t layer) const { return self_layers.contains(layer); }
    void validate(const NoiseSchedule& schedule, std::size_t layers) const;
};

enum class QuerySource { source, target };

/// Mutual-edit selection: source query while t > S, target query otherwise.
QuerySource select_query(double t, const AttentionPolicy& policy);

enum class BranchPass { cond, uncond };

struct CacheKey {
    std::size_t step = 0;
    std::size_t layer = 0;
    BranchPass pass = BranchPass::cond;
    auto operator<=>(const CacheKey&) const = default;
};

struct SelfAttentionEntry {
    Tensor q, k, v;  // [H x N' x d/H]
    MergePlan plan;
};

/// Source-branch attention tensors keyed by (step, layer, pass). Entries are
/// write-once; reads of absent entries throw CacheMiss.
class BranchCache {
public:
    void store_self(const CacheKey& key, SelfAttentionEntry entry);
    void store_cross(const CacheKey& key, Tensor probs);
    const SelfAttentionEntry& self_entry(const CacheKey& key) const;
    const Tensor& cross_entry(const CacheKey& key) const;
    bool has_self(const CacheKey& key) const { return self_.contains(key); }

    /// Drops every entry with step < step.
    void evict_before(std::size_t step);
    std::size_t size() const { return self_.size() + cross_.size(); }

private:
    std::map<CacheKey, SelfAttentionEntry> self_;
    std::map<CacheKey, Tensor> cross_;
};

/// softmax(Q K_src^T / sqrt(d_head)) V_src with Q chosen by select_query.
Tensor mutual_self_attention(double t, const CacheKey& key, const Tensor& q_tar, const BranchCache& cache,
                             const AttentionPolicy& policy);

/// target_to_source[j] = source position of target token j, or none.
struct TokenAlignment {
    std::vector<std::optional<std::size_t>> target_to_source;
    std::size_t source_tokens = 0;

    std::size_t mapped_count() const;
    void validate() const;
};

/// Longest common subsequence of token ids.
TokenAlignment align_tokens(const PromptEmbedding& source, const PromptEmbedding& target);

/// Cross-attention map edit on [N_patches x N_tokens] maps.
///
/// While t > cross_until: refine copies the source column into every aligned
/// target column; replace does the same and additionally gives unaligned
/// tokens the source column at the same position when both prompts have
/// equal length (word swap). Rows that changed are renormalized to sum 1;
/// untouched rows are returned bit for bit.
Tensor cross_attention_control(double t, const Tensor& target_map, const Tensor& source_map,
                               const TokenAlignment& alignment, const AttentionPolicy& policy);

// ---------------------------------------------------------------------------
// Dual-branch run

/// Step and guidance pass currently being evaluated; shared by the hooks of
/// one dual-branch run.
struct BranchCursor {
    std::size_t step = 0;
    BranchPass pass = BranchPass::cond;
    CacheKey key(std::size_t layer) const { return {step, layer, pass}; }
};

/// Writes source-branch tensors for controlled layers into the cache.
class SourceRecorder final : public AttentionHook {
public:
    SourceRecorder(BranchCache& cache, const BranchCursor& cursor, const AttentionPolicy& policy)
        : cache_(cache), cursor_(cursor), policy_(policy) {}

    void on_merge_plan(std::size_t layer, double t, MergePlan& plan) override;
    void on_self_attention(SelfAttentionIO& io) override;
    void on_cross_attention(CrossAttentionIO& io) override;

private:
    BranchCache& cache_;
    const BranchCursor& cursor_;
    const AttentionPolicy& policy_;
    std::optional<MergePlan> pending_plan_;
};

/// Applies mutual self-attention (both guidance passes) and cross-attention
/// control (conditional pass only) to the target.
class TargetController final : public AttentionHook {
public:
    TargetController(const BranchCache& cache, const BranchCursor& cursor, const AttentionPolicy& policy,
                     TokenAlignment alignment)
        : cache_(cache), cursor_(cursor), policy_(policy), alignment_(std::move(alignment)) {}

    void on_merge_plan(std::size_t layer, double t, MergePlan& plan) override;
    void on_self_attention(SelfAttentionIO& io) override;
    void on_cross_attention(CrossAttentionIO& io) override;

    /// One decision per (step, layer), regardless of guidance passes.
    const std::map<std::pair<std::size_t, std::size_t>, QuerySource>& decisions() const { return decisions_; }
    std::size_t source_query_uses() const;
    std::size_t target_query_uses() const;

private:
    const BranchCache& cache_;
    const BranchCursor& cursor_;
    const AttentionPolicy& policy_;
    TokenAlignment alignment_;
    std::map<std::pair<std::size_t, std::size_t>, QuerySource> decisions_;
};

/// Runs after the controller and checks that controlled layers consume the
/// cached source K and V (tag and bitwise content).
class ProvenanceAudit final : public AttentionHook {
public:
    ProvenanceAudit(const BranchCache& cache, const BranchCursor& cursor, const AttentionPolicy& policy)
        : cache_(cache), cursor_(cursor), policy_(policy) {}

    void on_self_attention(SelfAttentionIO& io) override;

    std::size_t checks() const { return checks_; }
    std::size_t violations() const { return violations_; }

private:
    const BranchCache& cache_;
    const BranchCursor& cursor_;
    const AttentionPolicy& policy_;
    std::size_t checks_ = 0;
    std::size_t violations_ = 0;
};

struct DualBranchPrompts {
    PromptEmbedding source;
    PromptEmbedding target;
    PromptEmbedding uncond;
};

struct DualBranchOptions {
    SolverKind solver = SolverKind::dpm2m;
    double guidance = 4.5;
    MergeConfig merge{0.0, MergeSimilarity::key_cosine};
    bool run_target = true;  // false runs the source branch alone

    // Extra instrumentation. Source hooks run after the recorder; target_before
    // sees the target's own tensors, target_after what the kernel consumes.
    std::vector<AttentionHook*> source_hooks;
    std::vector<AttentionHook*> target_before;
    std::vector<AttentionHook*> target_after;
};

struct DualBranchResult {
    Tensor x0_src;
    Tensor x0_tar;
    std::size_t q_src_uses = 0;
    std::size_t q_tar_uses = 0;
    std::size_t kv_checks = 0;
    std::size_t kv_violations = 0;
    EvalStats stats;
};

/// Lockstep denoising of a reconstruction (source) branch and an edit
/// (target) branch. Per step the source is evaluated first and fills the
/// cache; the target then runs with the controller hooks installed. Both
/// branches use the same solver and guidance weight.
DualBranchResult run_dual_branch(const Tensor& x_T_src, const Tensor& x_T_tar, const TimestepGrid& grid,
                                 const Denoiser& model, const AttentionPolicy& policy,
                                 const DualBranchPrompts& prompts, const DualBranchOptions& options = {});

}  // namespace latentedit
