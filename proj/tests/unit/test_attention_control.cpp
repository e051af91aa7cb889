// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include "latentedit/attention_control.hpp"
#include "latentedit/errors.hpp"
#include "latentedit/rng.hpp"
#include "latentedit/toy_dit.hpp"
#include "oracles.hpp"

using namespace latentedit;

namespace {

ToyDiTConfig small_model() {
    ToyDiTConfig c;
    c.grid = 4;
    c.layers = 4;
    c.heads = 2;
    c.width = 16;
    return c;
}

DualBranchPrompts prompts(std::string_view src, std::string_view tar) {
    return {encode_prompt(src), encode_prompt(tar), PromptEmbedding::unconditional(kDefaultTextDim)};
}

// Maps with positive entries and unit row sums.
Tensor stochastic(Rng& rng, std::size_t rows, std::size_t cols) {
    Tensor m({rows, cols});
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0;
        for (std::size_t c = 0; c < cols; ++c) s += (m(r, c) = 0.05 + rng.uniform());
        for (std::size_t c = 0; c < cols; ++c) m(r, c) /= s;
    }
    return m;
}

double row_sum(const Tensor& m, std::size_t r) {
    double s = 0;
    for (double v : m.row(r)) s += v;
    return s;
}

std::size_t nodes_at_or_below(const TimestepGrid& grid, double s) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < grid.steps(); ++i) count += grid.t(i) <= s ? 1 : 0;
    return count;
}

// Records source K/V per layer in call order; the target side checks that
// its n-th call on a layer consumes the source's n-th K/V for that layer.
struct KvLog {
    std::map<std::size_t, std::vector<std::pair<Tensor, Tensor>>> source;
    std::map<std::size_t, std::size_t> target_calls;
    std::size_t checks = 0;
    std::size_t mismatches = 0;
};

class SourceKv final : public AttentionHook {
public:
    explicit SourceKv(KvLog& log) : log_(log) {}
    void on_self_attention(SelfAttentionIO& io) override { log_.source[io.layer].emplace_back(io.k, io.v); }

private:
    KvLog& log_;
};

class TargetKv final : public AttentionHook {
public:
    TargetKv(KvLog& log, std::set<std::size_t> layers) : log_(log), layers_(std::move(layers)) {}
    void on_self_attention(SelfAttentionIO& io) override {
        const std::size_t n = log_.target_calls[io.layer]++;
        if (!layers_.contains(io.layer)) return;
        ++log_.checks;
        const auto& [k, v] = log_.source.at(io.layer).at(n);
        if (!(io.k == k && io.v == v)) ++log_.mismatches;
    }

private:
    KvLog& log_;
    std::set<std::size_t> layers_;
};

}  // namespace

TEST_CASE("parse cross modes and layer sets") {
    CHECK(parse_cross_mode("replace") == CrossMode::replace);
    CHECK(parse_cross_mode("refine") == CrossMode::refine);
    CHECK(parse_cross_mode("off") == CrossMode::off);
    CHECK_THROWS_AS(parse_cross_mode("reweight"), InvalidArgument);
    CHECK(to_string(CrossMode::refine) == "refine");
    CHECK(deep_layers(6) == std::set<std::size_t>{3, 4, 5});
    CHECK(deep_layers(5) == std::set<std::size_t>{2, 3, 4});
    CHECK(all_layers(3) == std::set<std::size_t>{0, 1, 2});
}

TEST_CASE("policy defaults and validation") {
    const NoiseSchedule s;
    const auto p = AttentionPolicy::defaults(s, 6);
    CHECK(p.s_threshold == 0.6);
    CHECK(p.cross_until == 0.5);
    CHECK(p.cross_mode == CrossMode::refine);
    CHECK(p.self_layers == std::set<std::size_t>{3, 4, 5});
    CHECK_NOTHROW(p.validate(s, 6));
    CHECK_THROWS_AS(p.validate(s, 5), InvalidArgument);
    AttentionPolicy bad = p;
    bad.s_threshold = 1e-4;
    CHECK_THROWS_AS(bad.validate(s, 6), InvalidArgument);
    bad.s_threshold = 1.5;
    CHECK_THROWS_AS(bad.validate(s, 6), InvalidArgument);
}

TEST_CASE("query selection follows the threshold") {
    AttentionPolicy p;
    p.s_threshold = 0.6;
    CHECK(select_query(0.61, p) == QuerySource::source);
    CHECK(select_query(0.6, p) == QuerySource::target);
    CHECK(select_query(0.1, p) == QuerySource::target);
}

TEST_CASE("branch cache is write-once and reports misses") {
    BranchCache cache;
    const CacheKey key{2, 1, BranchPass::cond};
    cache.store_self(key, {Tensor({1, 2, 2}), Tensor({1, 2, 2}), Tensor({1, 2, 2}), MergePlan::identity(2)});
    CHECK(cache.has_self(key));
    CHECK_THROWS_AS(cache.store_self(key, {}), InvalidArgument);
    CHECK_THROWS_AS(cache.self_entry({2, 1, BranchPass::uncond}), CacheMiss);
    CHECK_THROWS_AS(cache.cross_entry(key), CacheMiss);
    cache.store_cross(key, Tensor({1, 2, 1}));
    CHECK_THROWS_AS(cache.store_cross(key, Tensor({1, 2, 1})), InvalidArgument);
    CHECK(cache.size() == 2);
    cache.evict_before(2);
    CHECK(cache.size() == 2);
    cache.evict_before(3);
    CHECK(cache.size() == 0);
    CHECK_THROWS_AS(cache.self_entry(key), CacheMiss);
}

TEST_CASE("mutual self-attention picks the query by threshold") {
    Rng rng(1);
    BranchCache cache;
    const CacheKey key{0, 0, BranchPass::cond};
    const Tensor q_src = gaussian({2, 5, 3}, rng), k = gaussian({2, 5, 3}, rng), v = gaussian({2, 5, 3}, rng);
    const Tensor q_tar = gaussian({2, 5, 3}, rng);
    cache.store_self(key, {q_src, k, v, MergePlan::identity(5)});
    AttentionPolicy p;
    p.s_threshold = 0.5;
    CHECK(mutual_self_attention(0.7, key, q_tar, cache, p) == attention(q_src, k, v));
    CHECK(mutual_self_attention(0.3, key, q_tar, cache, p) == attention(q_tar, k, v));
    // Head 0 against the loop reference.
    const Tensor out = mutual_self_attention(0.3, key, q_tar, cache, p);
    CHECK(max_abs_diff(head_slice(out, 0), oracle::naive_attention(head_slice(q_tar, 0), head_slice(k, 0),
                                                                   head_slice(v, 0))) < 1e-14);
    CHECK_THROWS_AS(mutual_self_attention(0.3, {1, 0, BranchPass::cond}, q_tar, cache, p), CacheMiss);
}

TEST_CASE("token alignment examples") {
    const auto same = align_tokens(encode_prompt("a photo of a cat"), encode_prompt("a photo of a cat"));
    for (std::size_t j = 0; j < 5; ++j) CHECK(same.target_to_source[j] == j);

    const auto ins = align_tokens(encode_prompt("a cat"), encode_prompt("a red cat"));
    REQUIRE(ins.target_to_source.size() == 3);
    CHECK(ins.target_to_source[0] == 0u);
    CHECK_FALSE(ins.target_to_source[1].has_value());
    CHECK(ins.target_to_source[2] == 1u);

    const auto none = align_tokens(encode_prompt("red dog"), encode_prompt("blue cat"));
    CHECK(none.mapped_count() == 0);

    const auto swap = align_tokens(encode_prompt("a photo of a cat"), encode_prompt("a photo of a dog"));
    CHECK(swap.mapped_count() == 4);
    CHECK_FALSE(swap.target_to_source[4].has_value());
}

TEST_CASE("alignment length matches an independent LCS") {
    Rng rng(2);
    const std::vector<std::string> words{"a", "cat", "dog", "red", "on", "the"};
    for (int trial = 0; trial < 300; ++trial) {
        std::string s, t;
        const std::size_t ns = 1 + rng.next_u64() % 8, nt = 1 + rng.next_u64() % 8;
        for (std::size_t i = 0; i < ns; ++i) s += words[rng.next_u64() % words.size()] + " ";
        for (std::size_t i = 0; i < nt; ++i) t += words[rng.next_u64() % words.size()] + " ";
        const auto ps = encode_prompt(s), pt = encode_prompt(t);
        const auto al = align_tokens(ps, pt);
        CHECK_NOTHROW(al.validate());
        CHECK(al.mapped_count() == oracle::lcs_length(ps.tokens, pt.tokens));
        std::optional<std::size_t> last;
        for (std::size_t j = 0; j < al.target_to_source.size(); ++j) {
            const auto m = al.target_to_source[j];
            if (!m) continue;
            CHECK(ps.tokens[*m] == pt.tokens[j]);
            if (last) CHECK(*m > *last);
            last = m;
        }
    }
}

TEST_CASE("alignment validation") {
    TokenAlignment a{{0, 0}, 2};
    CHECK_THROWS_AS(a.validate(), InvalidAlignment);
    TokenAlignment b{{std::nullopt, 3}, 2};
    CHECK_THROWS_AS(b.validate(), InvalidAlignment);
    TokenAlignment c{{1, std::nullopt, 0}, 2};
    CHECK_NOTHROW(c.validate());
    Rng rng(3);
    AttentionPolicy p;
    p.cross_until = 0.0;
    CHECK_THROWS_AS(cross_attention_control(1.0, stochastic(rng, 4, 3), stochastic(rng, 4, 2), b, p), InvalidAlignment);
}

TEST_CASE("cross-attention control: off and late steps leave the map unchanged") {
    Rng rng(4);
    const Tensor tar = stochastic(rng, 4, 3), src = stochastic(rng, 4, 3);
    const TokenAlignment id{{0, 1, 2}, 3};
    AttentionPolicy p;
    p.cross_until = 0.5;
    p.cross_mode = CrossMode::off;
    CHECK(cross_attention_control(0.9, tar, src, id, p) == tar);
    p.cross_mode = CrossMode::replace;
    CHECK(cross_attention_control(0.5, tar, src, id, p) == tar);
    CHECK(cross_attention_control(0.9, tar, src, id, p) == src);
}

TEST_CASE("cross-attention control: refine with an inserted token") {
    Rng rng(5);
    const Tensor src = stochastic(rng, 4, 2);  // "a cat"
    const Tensor tar = stochastic(rng, 4, 3);  // "a red cat"
    const auto al = align_tokens(encode_prompt("a cat"), encode_prompt("a red cat"));
    AttentionPolicy p;
    p.cross_mode = CrossMode::refine;
    p.cross_until = 0.0;
    const Tensor out = cross_attention_control(1.0, tar, src, al, p);
    for (std::size_t r = 0; r < 4; ++r) {
        CHECK(std::abs(row_sum(out, r) - 1.0) < 1e-12);
        const double z = src(r, 0) + tar(r, 1) + src(r, 1);
        CHECK(out(r, 0) == doctest::Approx(src(r, 0) / z).epsilon(1e-14));
        CHECK(out(r, 1) == doctest::Approx(tar(r, 1) / z).epsilon(1e-14));
        CHECK(out(r, 2) == doctest::Approx(src(r, 1) / z).epsilon(1e-14));
    }
}

TEST_CASE("cross-attention control: replace versus refine on a word swap") {
    Rng rng(6);
    const Tensor src = stochastic(rng, 3, 3);
    const Tensor tar = stochastic(rng, 3, 3);
    const auto al = align_tokens(encode_prompt("a red cat"), encode_prompt("a red dog"));
    AttentionPolicy p;
    p.cross_until = 0.0;
    p.cross_mode = CrossMode::replace;
    CHECK(cross_attention_control(1.0, tar, src, al, p) == src);
    p.cross_mode = CrossMode::refine;
    const Tensor refined = cross_attention_control(1.0, tar, src, al, p);
    for (std::size_t r = 0; r < 3; ++r) {
        const double z = src(r, 0) + src(r, 1) + tar(r, 2);
        CHECK(refined(r, 2) == doctest::Approx(tar(r, 2) / z).epsilon(1e-14));
        CHECK(std::abs(row_sum(refined, r) - 1.0) < 1e-12);
    }
}

TEST_CASE("cross-attention control keeps untouched rows bitwise and rows stochastic") {
    Rng rng(7);
    Tensor src = stochastic(rng, 5, 4);
    Tensor tar = stochastic(rng, 5, 4);
    for (std::size_t c = 0; c < 4; ++c) tar(2, c) = src(2, c);
    const TokenAlignment id{{0, 1, 2, 3}, 4};
    AttentionPolicy p;
    p.cross_until = 0.0;
    const Tensor out = cross_attention_control(1.0, tar, src, id, p);
    for (std::size_t c = 0; c < 4; ++c) CHECK(out(2, c) == tar(2, c));
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t ns = 1 + rng.next_u64() % 6, nt = 1 + rng.next_u64() % 6;
        const Tensor s = stochastic(rng, 6, ns), t = stochastic(rng, 6, nt);
        TokenAlignment al{std::vector<std::optional<std::size_t>>(nt), ns};
        std::size_t next = 0;
        for (std::size_t j = 0; j < nt && next < ns; ++j) {
            if (rng.uniform() < 0.6) al.target_to_source[j] = next++;
        }
        for (auto mode : {CrossMode::replace, CrossMode::refine}) {
            p.cross_mode = mode;
            const Tensor o = cross_attention_control(1.0, t, s, al, p);
            for (std::size_t r = 0; r < 6; ++r) CHECK(std::abs(row_sum(o, r) - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("cross-attention control: zero rows fall back to uniform") {
    const TokenAlignment al{{0, std::nullopt}, 2};
    AttentionPolicy p;
    p.cross_until = 0.0;
    p.cross_mode = CrossMode::refine;
    const Tensor src = Tensor::matrix({{0.0, 1.0}});
    // Copying an equal value leaves the row untouched.
    const Tensor zero = Tensor::matrix({{0.0, 0.0}});
    CHECK(cross_attention_control(1.0, zero, src, al, p) == zero);
    const Tensor out = cross_attention_control(1.0, Tensor::matrix({{1.0, 0.0}}), src, al, p);
    CHECK(out == Tensor::matrix({{0.5, 0.5}}));
}

TEST_CASE("identical prompts reproduce the reconstruction bitwise") {
    const NoiseSchedule s;
    const ToyDiT dit(small_model(), s);
    const auto grid = TimestepGrid::make(s, 8);
    Rng rng(8);
    const Tensor x_T = gaussian(dit.config().latent_shape(), rng);
    for (double S : {s.t_min(), 0.3, 0.6, s.t_max()}) {
        auto policy = AttentionPolicy::defaults(s, 4);
        policy.s_threshold = S;
        policy.cross_mode = CrossMode::replace;
        DualBranchOptions opt;
        opt.merge = MergeConfig{0.5};
        const auto r = run_dual_branch(x_T, x_T, grid, dit, policy, prompts("a cat", "a cat"), opt);
        CHECK(r.x0_tar == r.x0_src);
        CHECK(r.q_src_uses + r.q_tar_uses == grid.steps() * policy.self_layers.size());
        CHECK(r.q_tar_uses == nodes_at_or_below(grid, S) * policy.self_layers.size());
        CHECK(r.kv_violations == 0);
        CHECK(r.kv_checks == 2 * grid.steps() * policy.self_layers.size());
    }
}

TEST_CASE("query usage counts on a 30-step grid") {
    const NoiseSchedule s;
    const ToyDiT dit(small_model(), s);
    const auto grid = TimestepGrid::make(s, 30);
    Rng rng(9);
    const Tensor x_T = gaussian(dit.config().latent_shape(), rng);
    auto policy = AttentionPolicy::defaults(s, 4);
    DualBranchOptions opt;
    opt.guidance = 1.0;
    const auto r = run_dual_branch(x_T, x_T, grid, dit, policy, prompts("a cat", "a dog"), opt);
    std::size_t below = 0;
    for (std::size_t i = 0; i < 30; ++i) below += grid.t(i) <= 0.6 ? 1 : 0;
    CHECK(r.q_tar_uses == below * 2);
    CHECK(r.q_src_uses == (30 - below) * 2);
    CHECK(below > 0);
    CHECK(below < 30);
}

TEST_CASE("source branch is unaffected by the target branch") {
    const NoiseSchedule s;
    const ToyDiT dit(small_model(), s);
    const auto grid = TimestepGrid::make(s, 6);
    Rng rng(10);
    const Tensor x_T = gaussian(dit.config().latent_shape(), rng);
    const auto policy = AttentionPolicy::defaults(s, 4);
    DualBranchOptions with, without;
    without.run_target = false;
    const auto p = prompts("a cat", "a red dog");
    const auto a = run_dual_branch(x_T, x_T, grid, dit, policy, p, with);
    const auto b = run_dual_branch(x_T, x_T, grid, dit, policy, p, without);
    CHECK(a.x0_src == b.x0_src);
    CHECK(b.x0_tar.empty());
    // And matches a plain guided sampling run.
    const auto solo = sample(x_T, grid, bind_guided(dit, p.source, p.uncond, 4.5), SolverKind::dpm2m);
    CHECK(solo == a.x0_src);
}

TEST_CASE("no-op policy equals an uncontrolled target run") {
    const NoiseSchedule s;
    const ToyDiT dit(small_model(), s);
    const auto grid = TimestepGrid::make(s, 6);
    Rng rng(11);
    const Tensor x_T = gaussian(dit.config().latent_shape(), rng);
    AttentionPolicy policy;
    policy.cross_mode = CrossMode::off;
    const auto p = prompts("a cat", "a red dog");
    const auto r = run_dual_branch(x_T, x_T, grid, dit, policy, p);
    const auto solo = sample(x_T, grid, bind_guided(dit, p.target, p.uncond, 4.5), SolverKind::dpm2m);
    CHECK(r.x0_tar == solo);
    CHECK(r.kv_checks == 0);
    CHECK(r.q_src_uses + r.q_tar_uses == 0);
}

TEST_CASE("controlled layers consume source K and V") {
    const NoiseSchedule s;
    const ToyDiT dit(small_model(), s);
    const auto grid = TimestepGrid::make(s, 10);
    Rng rng(12);
    const Tensor x_T = gaussian(dit.config().latent_shape(), rng);
    const auto policy = AttentionPolicy::defaults(s, 4);
    KvLog log;
    SourceKv source_hook(log);
    TargetKv target_hook(log, policy.self_layers);
    DualBranchOptions opt;
    opt.merge = MergeConfig{0.8};
    opt.source_hooks = {&source_hook};
    opt.target_after = {&target_hook};
    const auto r = run_dual_branch(x_T, x_T, grid, dit, policy, prompts("a cat", "a red dog"), opt);
    CHECK(log.checks == 2 * 10 * policy.self_layers.size());
    CHECK(log.mismatches == 0);
    CHECK(r.kv_violations == 0);
    CHECK(r.x0_tar != r.x0_src);
}

TEST_CASE("test hooks detect keys that did not come from the source") {
    class Tamper final : public AttentionHook {
    public:
        void on_self_attention(SelfAttentionIO& io) override { io.k *= 1.0000001; }
    };
    const NoiseSchedule s;
    const ToyDiT dit(small_model(), s);
    const auto grid = TimestepGrid::make(s, 3);
    Rng rng(13);
    const Tensor x_T = gaussian(dit.config().latent_shape(), rng);
    Tamper tamper;
    KvLog log;
    SourceKv source_hook(log);
    TargetKv target_hook(log, deep_layers(4));
    DualBranchOptions opt;
    opt.source_hooks = {&source_hook};
    opt.target_after = {&tamper, &target_hook};
    run_dual_branch(x_T, x_T, grid, dit, AttentionPolicy::defaults(s, 4), prompts("a cat", "a dog"), opt);
    CHECK(log.checks > 0);
    CHECK(log.mismatches == log.checks);
}

TEST_CASE("S = t_min: controlled layers attend with the source query, keys and values") {
    class SourceQkv final : public AttentionHook {
    public:
        std::map<std::size_t, std::vector<Tensor>> q;
        void on_self_attention(SelfAttentionIO& io) override { q[io.layer].push_back(io.q); }
    };
    class TargetQ final : public AttentionHook {
    public:
        explicit TargetQ(const SourceQkv& src) : src_(src) {}
        std::map<std::size_t, std::size_t> calls;
        std::size_t checks = 0, mismatches = 0;
        void on_self_attention(SelfAttentionIO& io) override {
            const std::size_t n = calls[io.layer]++;
            if (io.layer < 2) return;
            ++checks;
            if (!(io.q == src_.q.at(io.layer).at(n))) ++mismatches;
        }

    private:
        const SourceQkv& src_;
    };
    const NoiseSchedule s;
    const ToyDiT dit(small_model(), s);
    const auto grid = TimestepGrid::make(s, 6);
    Rng rng(14);
    const Tensor x_T = gaussian(dit.config().latent_shape(), rng);
    auto policy = AttentionPolicy::defaults(s, 4);
    policy.s_threshold = s.t_min();
    SourceQkv src;
    TargetQ tar(src);
    DualBranchOptions opt;
    opt.source_hooks = {&src};
    opt.target_after = {&tar};
    const auto r = run_dual_branch(x_T, x_T, grid, dit, policy, prompts("a cat", "a red dog"), opt);
    CHECK(tar.checks == 2 * 6 * 2);
    CHECK(tar.mismatches == 0);
    CHECK(r.q_tar_uses == 0);
}

TEST_CASE("dual-branch input checks") {
    const NoiseSchedule s;
    const ToyDiT dit(small_model(), s);
    const auto grid = TimestepGrid::make(s, 3);
    const Tensor a({3, 4, 4}), b({3, 2, 2});
    const auto policy = AttentionPolicy::defaults(s, 4);
    CHECK_THROWS_AS(run_dual_branch(a, b, grid, dit, policy, prompts("a", "b")), InvalidShape);
    DualBranchOptions opt;
    opt.solver = SolverKind::rk4_oracle;
    CHECK_THROWS_AS(run_dual_branch(a, a, grid, dit, policy, prompts("a", "b"), opt), InvalidArgument);
}
