// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "latentedit/attention.hpp"
#include "latentedit/tensor.hpp"

namespace latentedit {

enum class MergeSimilarity { key_cosine, value_cosine };

MergeSimilarity parse_similarity(std::string_view name);

struct MergeConfig {
    double ratio = 0.8;
    MergeSimilarity similarity = MergeSimilarity::key_cosine;

    /// floor(ratio * n / 2): merges are capped by the size of the odd set.
    std::size_t merged_pairs(std::size_t n_tokens) const;
    void validate() const;
};

/// Partition of token indices produced by bipartite soft matching.
///
/// Groups are ordered by representative index. A group that absorbed merged
/// tokens is represented by its even-index (B-side) token; odd-index tokens
/// left unmatched stand alone as their own representative.
class MergePlan {
public:
    static MergePlan identity(std::size_t n_tokens);
    /// Builds a plan from explicit groups; throws unless they partition 0..n-1.
    static MergePlan from_groups(std::size_t n_tokens, std::vector<std::vector<std::size_t>> groups);

    std::size_t n_tokens() const { return group_of_.size(); }
    std::size_t group_count() const { return groups_.size(); }
    std::size_t merged_count() const { return n_tokens() - group_count(); }
    bool is_identity() const { return merged_count() == 0; }

    const std::vector<std::vector<std::size_t>>& groups() const { return groups_; }
    std::size_t representative(std::size_t g) const { return representatives_.at(g); }
    std::size_t size(std::size_t g) const { return groups_.at(g).size(); }
    std::size_t group_of(std::size_t token) const { return group_of_.at(token); }

    friend bool operator==(const MergePlan&, const MergePlan&) = default;

private:
    std::vector<std::vector<std::size_t>> groups_;
    std::vector<std::size_t> representatives_;
    std::vector<std::size_t> group_of_;
};

/// Cosine similarity between two rows; zero when either row is all zeros.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Splits tokens into A (odd indices) and B (even indices), matches each A
/// token to its most similar B token, and merges the m best-matching A tokens.
/// Ties resolve to the lower index.
MergePlan build_plan(const Tensor& features, const MergeConfig& config, MacCounter* cost = nullptr);

/// Mean of each group's rows -> [(N - m) x d].
Tensor merge(const Tensor& x, const MergePlan& plan);

/// Size-weighted variant for repeated merging: token i carries weight
/// sizes[i]; returns the weighted means and accumulates group weights.
Tensor merge_weighted(const Tensor& x, const std::vector<double>& sizes, const MergePlan& plan,
                      std::vector<double>* group_sizes);

/// Broadcasts each group's row back to all of its members -> [N x d].
Tensor unmerge(const Tensor& y, const MergePlan& plan);

/// Multi-head self-attention over x [N x d] with projections W [d x d].
Tensor plain_attention(const Tensor& x, const Tensor& w_q, const Tensor& w_k, const Tensor& w_v,
                       std::size_t heads = 1, MacCounter* cost = nullptr);

/// Plan on keys (or values), merge tokens, attend over the reduced set,
/// unmerge. With no merges this is exactly plain_attention.
Tensor merged_attention(const Tensor& x, const Tensor& w_q, const Tensor& w_k, const Tensor& w_v,
                        const MergeConfig& config, std::size_t heads = 1, MacCounter* cost = nullptr);

/// Per-token similarity features: the mean over heads of [N x d] projections.
Tensor head_mean_features(const Tensor& projected, std::size_t heads);

}  // namespace latentedit
