// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "latentedit/patch_merging.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "latentedit/errors.hpp"

namespace latentedit {

MergeSimilarity parse_similarity(std::string_view name) {
    if (name == "key-cosine") return MergeSimilarity::key_cosine;
    if (name == "value-cosine") return MergeSimilarity::value_cosine;
    throw InvalidArgument("unknown merge similarity '" + std::string(name) + "'");
}

std::size_t MergeConfig::merged_pairs(std::size_t n_tokens) const {
    validate();
    if (n_tokens < 2) return 0;
    const auto m = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n_tokens) / 2.0));
    return std::min(m, n_tokens / 2);
}

void MergeConfig::validate() const {
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw InvalidArgument("merge ratio must lie in [0, 1]");
}

MergePlan MergePlan::identity(std::size_t n_tokens) {
    std::vector<std::vector<std::size_t>> groups(n_tokens);
    for (std::size_t i = 0; i < n_tokens; ++i) groups[i] = {i};
    return from_groups(n_tokens, std::move(groups));
}

MergePlan MergePlan::from_groups(std::size_t n_tokens, std::vector<std::vector<std::size_t>> groups) {
    MergePlan plan;
    plan.group_of_.assign(n_tokens, n_tokens);
    for (auto& g : groups) {
        if (g.empty()) throw InvalidArgument("merge plan: empty group");
        std::sort(g.begin(), g.end());
    }
    // Representative: the unique even member if any, else the (single) member.
    std::vector<std::size_t> reps;
    reps.reserve(groups.size());
    for (const auto& g : groups) {
        std::size_t rep = g.front();
        std::size_t even = 0;
        for (auto i : g) {
            if (i % 2 == 0) {
                rep = i;
                ++even;
            }
        }
        if (even > 1 || (even == 0 && g.size() > 1)) {
            throw InvalidArgument("merge plan: each merged group needs exactly one B-side token");
        }
        reps.push_back(rep);
    }
    std::vector<std::size_t> order(groups.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return reps[a] < reps[b]; });
    for (auto gi : order) {
        const std::size_t idx = plan.groups_.size();
        for (auto token : groups[gi]) {
            if (token >= n_tokens || plan.group_of_[token] != n_tokens) {
                throw InvalidArgument("merge plan: groups do not partition the token set");
            }
            plan.group_of_[token] = idx;
        }
        plan.groups_.push_back(std::move(groups[gi]));
        plan.representatives_.push_back(reps[gi]);
    }
    if (std::find(plan.group_of_.begin(), plan.group_of_.end(), n_tokens) != plan.group_of_.end()) {
        throw InvalidArgument("merge plan: some tokens are not covered");
    }
    return plan;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0) return 0.0;
    return ab / std::sqrt(aa * bb);
}

MergePlan build_plan(const Tensor& features, const MergeConfig& config, MacCounter* cost) {
    if (features.rank() != 2) throw InvalidShape("build_plan: features must be [N x d]");
    const std::size_t n = features.dim(0);
    const std::size_t m = config.merged_pairs(n);
    if (m == 0) return MergePlan::identity(n);

    const std::size_t d = features.dim(1);
    const std::size_t n_b = (n + 1) / 2;
    const std::size_t n_a = n / 2;

    // Unit-normalize once so the A x B similarity block is a plain GEMM.
    auto unit_rows = [&](std::size_t first) {
        const std::size_t count = (n - first + 1) / 2;
        Tensor out({count, d});
        for (std::size_t r = 0; r < count; ++r) {
            auto src = features.row(first + 2 * r);
            double ss = 0.0;
            for (double v : src) ss += v * v;
            const double inv = ss > 0.0 ? 1.0 / std::sqrt(ss) : 0.0;
            auto dst = out.row(r);
            for (std::size_t c = 0; c < d; ++c) dst[c] = src[c] * inv;
        }
        return out;
    };
    const Tensor a_unit = unit_rows(1);
    const Tensor b_unit = unit_rows(0);
    const Tensor sim = matmul_nt(a_unit, b_unit);
    if (cost) cost->add(static_cast<std::uint64_t>(n_a) * n_b * d);

    struct Match {
        std::size_t a;
        std::size_t b;
        double score;
    };
    std::vector<Match> matches(n_a);
    for (std::size_t ai = 0; ai < n_a; ++ai) {
        std::size_t best = 0;
        double best_score = sim(ai, 0);
        for (std::size_t bi = 1; bi < n_b; ++bi) {
            if (sim(ai, bi) > best_score) {
                best_score = sim(ai, bi);
                best = bi;
            }
        }
        matches[ai] = {2 * ai + 1, 2 * best, best_score};
    }
    std::stable_sort(matches.begin(), matches.end(), [](const Match& x, const Match& y) { return x.score > y.score; });

    std::vector<std::vector<std::size_t>> groups;
    groups.reserve(n - m);
    std::vector<std::size_t> b_group(n_b);
    for (std::size_t bi = 0; bi < n_b; ++bi) {
        b_group[bi] = groups.size();
        groups.push_back({2 * bi});
    }
    for (std::size_t k = 0; k < matches.size(); ++k) {
        if (k < m) {
            groups[b_group[matches[k].b / 2]].push_back(matches[k].a);
        } else {
            groups.push_back({matches[k].a});
        }
    }
    return MergePlan::from_groups(n, std::move(groups));
}

Tensor merge(const Tensor& x, const MergePlan& plan) {
    if (x.rank() != 2 || x.dim(0) != plan.n_tokens()) {
        throw InvalidShape("merge: expected " + std::to_string(plan.n_tokens()) + " rows, got " +
                           shape_string(x.shape()));
    }
    if (plan.is_identity()) return x;
    const std::size_t d = x.dim(1);
    Tensor out({plan.group_count(), d});
    std::vector<double> dev(d);
    for (std::size_t g = 0; g < plan.group_count(); ++g) {
        auto dst = out.row(g);
        const auto& members = plan.groups()[g];
        auto first = x.row(members.front());
        std::copy(first.begin(), first.end(), dst.begin());
        if (members.size() == 1) continue;
        // Mean as first member plus mean deviation: exact when members are equal.
        std::fill(dev.begin(), dev.end(), 0.0);
        for (std::size_t k = 1; k < members.size(); ++k) {
            auto src = x.row(members[k]);
            for (std::size_t c = 0; c < d; ++c) dev[c] += src[c] - first[c];
        }
        const double n = static_cast<double>(members.size());
        for (std::size_t c = 0; c < d; ++c) dst[c] += dev[c] / n;
    }
    return out;
}

Tensor merge_weighted(const Tensor& x, const std::vector<double>& sizes, const MergePlan& plan,
                      std::vector<double>* group_sizes) {
    if (x.rank() != 2 || x.dim(0) != plan.n_tokens() || sizes.size() != plan.n_tokens()) {
        throw InvalidShape("merge_weighted: token count mismatch");
    }
    const std::size_t d = x.dim(1);
    Tensor out({plan.group_count(), d});
    std::vector<double> totals(plan.group_count(), 0.0);
    for (std::size_t g = 0; g < plan.group_count(); ++g) {
        auto dst = out.row(g);
        for (auto token : plan.groups()[g]) {
            auto src = x.row(token);
            for (std::size_t c = 0; c < d; ++c) dst[c] += sizes[token] * src[c];
            totals[g] += sizes[token];
        }
        if (totals[g] <= 0.0) throw InvalidArgument("merge_weighted: non-positive group weight");
        for (double& v : dst) v /= totals[g];
    }
    if (group_sizes) *group_sizes = std::move(totals);
    return out;
}

Tensor unmerge(const Tensor& y, const MergePlan& plan) {
    if (y.rank() != 2 || y.dim(0) != plan.group_count()) {
        throw InvalidShape("unmerge: expected " + std::to_string(plan.group_count()) + " rows, got " +
                           shape_string(y.shape()));
    }
    if (plan.is_identity()) return y;
    const std::size_t d = y.dim(1);
    Tensor out({plan.n_tokens(), d});
    for (std::size_t i = 0; i < plan.n_tokens(); ++i) {
        auto src = y.row(plan.group_of(i));
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

Tensor head_mean_features(const Tensor& projected, std::size_t heads) {
    if (projected.rank() != 2 || heads == 0 || projected.dim(1) % heads != 0) {
        throw InvalidShape("head_mean_features: width not divisible by head count");
    }
    const std::size_t n = projected.dim(0), dh = projected.dim(1) / heads;
    if (heads == 1) return projected;
    Tensor out({n, dh});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t h = 0; h < heads; ++h)
            for (std::size_t c = 0; c < dh; ++c) out(i, c) += projected(i, h * dh + c);
    out *= 1.0 / static_cast<double>(heads);
    return out;
}

namespace {

Tensor project_and_attend(const Tensor& x, const Tensor& w_q, const Tensor& w_k, const Tensor& w_v,
                          std::size_t heads, MacCounter* cost) {
    const Tensor q = split_heads(matmul(x, w_q), heads);
    const Tensor k = split_heads(matmul(x, w_k), heads);
    const Tensor v = split_heads(matmul(x, w_v), heads);
    if (cost) {
        cost->add(static_cast<std::uint64_t>(x.dim(0)) * x.dim(1) * (w_q.dim(1) + w_k.dim(1) + w_v.dim(1)));
    }
    return merge_heads(attention(q, k, v, cost));
}

}  // namespace

Tensor plain_attention(const Tensor& x, const Tensor& w_q, const Tensor& w_k, const Tensor& w_v,
                       std::size_t heads, MacCounter* cost) {
    return project_and_attend(x, w_q, w_k, w_v, heads, cost);
}

Tensor merged_attention(const Tensor& x, const Tensor& w_q, const Tensor& w_k, const Tensor& w_v,
                        const MergeConfig& config, std::size_t heads, MacCounter* cost) {
    if (x.rank() != 2) throw InvalidShape("merged_attention: x must be [N x d]");
    if (config.merged_pairs(x.dim(0)) == 0) return plain_attention(x, w_q, w_k, w_v, heads, cost);

    const Tensor& w_sim = config.similarity == MergeSimilarity::key_cosine ? w_k : w_v;
    const Tensor projected = matmul(x, w_sim);
    if (cost) cost->add(static_cast<std::uint64_t>(x.dim(0)) * x.dim(1) * w_sim.dim(1));
    const MergePlan plan = build_plan(head_mean_features(projected, heads), config, cost);
    return unmerge(project_and_attend(merge(x, plan), w_q, w_k, w_v, heads, cost), plan);
}

}  // namespace latentedit
