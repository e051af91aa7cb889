// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

// Acceptance checks: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "latentedit/attention_control.hpp"
#include "latentedit/bench.hpp"
#include "latentedit/image.hpp"
#include "latentedit/inversion.hpp"
#include "latentedit/patch_merging.hpp"
#include "latentedit/pipeline.hpp"
#include "latentedit/rng.hpp"
#include "latentedit/samplers.hpp"
#include "latentedit/toy_dit.hpp"
#include "oracles.hpp"

#ifndef LATENTEDIT_CLI_PATH
#error "LATENTEDIT_CLI_PATH must name the latentedit executable"
#endif

using namespace latentedit;

namespace {

// Tolerances and limits.
constexpr double kDdimSlopeLo = 0.8, kDdimSlopeHi = 1.3;
constexpr double kDpmSlopeLo = 1.6, kDpmSlopeHi = 2.4;
constexpr double kOrderSeconds = 10.0;
constexpr double kFewStepSeconds = 5.0;
constexpr double kAssistedTol = 1e-2, kHistoryTol = 2e-2, kConstantTol = 1e-10;
constexpr double kInversionSeconds = 30.0;
constexpr double kDuplicateTol = 1e-10;
constexpr double kSpeedup = 1.5;
constexpr double kBenchSeconds = 60.0;
constexpr double kPsnrTol = 1e-9;

// Diffusion-coefficient sweep for the analytic denoiser.
const std::vector<double> kGammaSq = {0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0};

// Order measurement window: away from the t_min end where the analytic
// flow's curvature in lambda dominates the coarse grids.
constexpr double kOrderTMin = 0.2, kOrderTMax = 0.5;

const PromptEmbedding kNull = PromptEmbedding::unconditional(4);

struct Outcome {
    bool pass = true;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

Tensor noise(std::uint64_t seed, Tensor::Shape shape = {3, 8, 8}) {
    Rng rng(seed);
    return gaussian(shape, rng);
}

double rel_error(const Tensor& a, const Tensor& b) { return norm2(a - b) / norm2(b); }

DataPrediction constant_prediction(const Tensor& c) {
    return [c](const Tensor&, double) { return c; };
}

std::vector<std::uint8_t> file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Slopes of log error against log N for DDIM and 2M on one schedule window.
std::pair<double, double> order_slopes(const NoiseSchedule& s, double g2, std::uint64_t seed) {
    AnalyticGaussianDenoiser g(noise(seed), g2, s);
    const auto model = bind_model(g, kNull);
    const Tensor xT = noise(seed + 1);
    const Tensor ref = rk4_oracle(xT, s, model, kDefaultOracleSubsteps);
    std::vector<double> ns, e1, e2;
    for (std::size_t n : {5u, 10u, 20u, 40u}) {
        const auto grid = TimestepGrid::make(s, n);
        ns.push_back(static_cast<double>(n));
        e1.push_back(norm2(sample(xT, grid, model, SolverKind::ddim) - ref));
        e2.push_back(norm2(sample(xT, grid, model, SolverKind::dpm2m) - ref));
    }
    return {oracle::convergence_order(ns, e1), oracle::convergence_order(ns, e2)};
}

Outcome solver_order() {
    const auto t0 = Clock::now();
    Outcome o;
    const NoiseSchedule window({0.1, 20.0, kOrderTMin, kOrderTMax});
    double lo1 = INFINITY, hi1 = -INFINITY, lo2 = INFINITY, hi2 = -INFINITY;
    std::uint64_t seed = 100;
    for (double g2 : kGammaSq) {
        const auto [s1, s2] = order_slopes(window, g2, seed);
        seed += 2;
        lo1 = std::min(lo1, s1), hi1 = std::max(hi1, s1);
        lo2 = std::min(lo2, s2), hi2 = std::max(hi2, s2);
        if (!(s1 >= kDdimSlopeLo && s1 <= kDdimSlopeHi && s2 >= kDpmSlopeLo && s2 <= kDpmSlopeHi)) o.pass = false;
    }
    // The oracle itself against the closed-form flow.
    AnalyticGaussianDenoiser g(noise(1), 1.0, window);
    const Tensor xT = noise(2);
    const double oracle_err = rel_error(rk4_oracle(xT, window, bind_model(g, kNull)),
                                        oracle::gaussian_flow(oracle::Vp{}, g.mu(), 1.0, xT, kOrderTMax, kOrderTMin));
    if (!(oracle_err < 1e-10)) o.pass = false;
    const auto [d1, d2] = order_slopes(NoiseSchedule{}, 1.0, 200);
    const double secs = seconds_since(t0);
    if (secs >= kOrderSeconds) o.pass = false;
    o.detail = "t in [" + fmt(kOrderTMin) + "," + fmt(kOrderTMax) + "], gamma^2 sweep: ddim slope " + fmt(lo1) +
               ".." + fmt(hi1) + ", 2M slope " + fmt(lo2) + ".." + fmt(hi2) + "; rk4 vs exact " + fmt(oracle_err) +
               "; default-window diagnostic ddim " + fmt(d1) + ", 2M " + fmt(d2) + "; " + fmt(secs) + " s";
    return o;
}

Outcome ddim_reduction() {
    Outcome o;
    Rng rng(7);
    const oracle::Vp vp;
    std::size_t bitwise = 0;
    double worst_vp = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.next_u64() % 59;
        const auto spacing = rng.next_u64() % 2 ? GridSpacing::uniform_t : GridSpacing::uniform_lambda;
        const NoiseSchedule s;
        const auto grid = TimestepGrid::make(s, n, spacing);
        AnalyticGaussianDenoiser g(gaussian({2, 4, 4}, rng), 0.05 + 2.0 * rng.uniform(), s);
        const auto model = bind_model(g, kNull);

        SolverState state;
        state.x = gaussian({2, 4, 4}, rng);
        state.i = rng.next_u64() % n;
        const std::size_t hist = rng.next_u64() % 3;
        for (std::size_t k = 0; k < hist; ++k) state.history.push_back({rng.uniform(), gaussian({2, 4, 4}, rng)});

        const Tensor d = model(state.x, grid.t(state.i));
        const std::size_t i = state.i + 1;
        // x_i = (sigma_i / sigma_{i-1}) x_{i-1} - alpha_i (e^{-h_i} - 1) d_{i-1}
        const double a = grid.sigma(i) / grid.sigma(i - 1);
        const double b = -grid.alpha(i) * std::expm1(-(grid.lambda(i) - grid.lambda(i - 1)));
        Tensor expect = state.x;
        for (std::size_t k = 0; k < expect.size(); ++k) expect[k] = a * state.x[k] + b * d[k];

        // Same update with node values from the independent schedule.
        const double ti = grid.t(i), tp = grid.t(i - 1);
        const double av = vp.sigma(ti) / vp.sigma(tp);
        const double bv = vp.alpha(ti) * (1.0 - std::exp(-(vp.lambda(ti) - vp.lambda(tp))));
        Tensor indep = state.x;
        for (std::size_t k = 0; k < indep.size(); ++k) indep[k] = av * state.x[k] + bv * d[k];

        const Tensor got = dpm2m_step(state, grid, model, 1).x;
        if (got == expect) ++bitwise;
        worst_vp = std::max(worst_vp, max_abs_diff(got, indep) / std::max(1.0, norm2(indep)));
    }
    o.pass = bitwise == 100 && worst_vp < 1e-12;
    o.detail = std::to_string(bitwise) + "/100 bitwise; independent schedule within " + fmt(worst_vp);
    return o;
}

Outcome few_step() {
    const auto t0 = Clock::now();
    Outcome o;
    const NoiseSchedule s;
    double worst_ratio = 0;
    std::uint64_t seed = 300;
    for (double g2 : kGammaSq) {
        AnalyticGaussianDenoiser g(noise(seed), g2, s);
        const auto model = bind_model(g, kNull);
        const Tensor xT = noise(seed + 1);
        seed += 2;
        const Tensor ref = rk4_oracle(xT, s, model);
        const double e15 = norm2(sample(xT, TimestepGrid::make(s, 15), model, SolverKind::dpm2m) - ref);
        const double e50 = norm2(sample(xT, TimestepGrid::make(s, 50), model, SolverKind::ddim) - ref);
        worst_ratio = std::max(worst_ratio, e15 / e50);
        if (!(e15 <= e50)) o.pass = false;
    }
    const double secs = seconds_since(t0);
    if (secs >= kFewStepSeconds) o.pass = false;
    o.detail = "max err(2M,15)/err(ddim,50) over gamma^2 sweep " + fmt(worst_ratio) + "; " + fmt(secs) + " s";
    return o;
}

Outcome inversion_fidelity() {
    const auto t0 = Clock::now();
    Outcome o;
    const NoiseSchedule s;
    const auto grid = TimestepGrid::make(s, 30);
    const ToyDiT dit(ToyDiTConfig{}, s);
    const auto prompt = encode_prompt("a photo of a cat");
    const auto model = bind_model(dit, prompt);
    InversionConfig history;
    history.estimate = EstimateMode::history_only;

    // A Gaussian latent and an encoded picture.
    const std::vector<Tensor> inputs = {noise(21, dit.config().latent_shape()),
                                        encode_image(synthetic_image(0, 2 * dit.config().grid), 2)};
    double worst_a = 0, worst_h = 0;
    for (const Tensor& x0 : inputs) {
        worst_a = std::max(worst_a, roundtrip_error(x0, grid, model, InversionMethod::dpm).error);
        worst_h = std::max(worst_h, roundtrip_error(x0, grid, model, InversionMethod::dpm, history).error);
    }
    const Tensor x0 = noise(3);
    const auto cmodel = constant_prediction(noise(4));
    double worst_c = 0;
    for (auto method : {InversionMethod::ddim, InversionMethod::dpm})
        worst_c = std::max(worst_c, roundtrip_error(x0, grid, cmodel, method).error);
    const double secs = seconds_since(t0);
    o.pass = worst_a < kAssistedTol && worst_h < kHistoryTol && worst_c < kConstantTol && secs < kInversionSeconds;
    o.detail = "assisted " + fmt(worst_a) + ", history " + fmt(worst_h) + ", constant " + fmt(worst_c) + "; " +
               fmt(secs) + " s";
    return o;
}

Outcome inversion_superiority() {
    Outcome o;
    const NoiseSchedule s;
    InversionConfig history;
    history.estimate = EstimateMode::history_only;
    std::size_t cases = 0, held = 0;
    double worst = 0;
    std::uint64_t seed = 500;
    for (double g2 : {0.25, 1.0, 4.0}) {
        AnalyticGaussianDenoiser g(noise(seed, {2, 4, 4}), g2, s);
        const DataPrediction model = [&](const Tensor& x, double t) { return g.denoise(x, t); };
        const Tensor x0 = g.mu() + std::sqrt(g2) * noise(seed + 1, {2, 4, 4});
        seed += 2;
        for (std::size_t n : {10u, 20u, 30u, 50u}) {
            const auto grid = TimestepGrid::make(s, n);
            const double e_ddim = roundtrip_error(x0, grid, model, InversionMethod::ddim).error;
            for (const InversionConfig& c : {InversionConfig{}, history}) {
                const double e = roundtrip_error(x0, grid, model, InversionMethod::dpm, c).error;
                ++cases;
                held += e <= e_ddim ? 1 : 0;
                worst = std::max(worst, e / e_ddim);
            }
        }
    }
    o.pass = held == cases;
    o.detail = std::to_string(held) + "/" + std::to_string(cases) + " cases dpm <= ddim; max ratio " + fmt(worst);
    return o;
}

DualBranchPrompts prompts(std::string_view src, std::string_view tar) {
    return {encode_prompt(src), encode_prompt(tar), PromptEmbedding::unconditional(kDefaultTextDim)};
}

Outcome attention_identity() {
    Outcome o;
    // Full pipeline with identical prompts.
    EditRequest req;
    req.source_prompt = req.target_prompt = "a photo of a cat";
    const EditResult r = edit(req);
    const bool pipeline_ok = r.edited == r.reconstructed;

    const NoiseSchedule s;
    const ToyDiT dit(ToyDiTConfig{}, s);
    const auto grid = TimestepGrid::make(s, 30);
    const Tensor x_T = noise(31, dit.config().latent_shape());
    std::size_t bitwise = 0, counted = 0;
    std::string counts;
    for (double S : {s.t_min(), 0.3, 0.6, s.t_max()}) {
        auto policy = AttentionPolicy::defaults(s, dit.config().layers);
        policy.s_threshold = S;
        DualBranchOptions opt;
        opt.merge = MergeConfig{0.8};
        const auto d = run_dual_branch(x_T, x_T, grid, dit, policy, prompts("a cat", "a cat"), opt);
        bitwise += d.x0_tar == d.x0_src ? 1 : 0;
        // Target query used at grid nodes with t <= S.
        std::size_t nodes = 0;
        for (std::size_t i = 0; i < grid.steps(); ++i) nodes += grid.t(i) <= S ? 1 : 0;
        const std::size_t layers = policy.self_layers.size();
        if (d.q_tar_uses == nodes * layers && d.q_src_uses == (grid.steps() - nodes) * layers) ++counted;
        counts += (counts.empty() ? "" : ",") + std::to_string(d.q_tar_uses);
    }
    o.pass = pipeline_ok && bitwise == 4 && counted == 4;
    o.detail = std::string("pipeline edit == reconstruction: ") + (pipeline_ok ? "yes" : "no") + "; dual branch " +
               std::to_string(bitwise) + "/4 bitwise, usage counts " + std::to_string(counted) +
               "/4 match (q_tar " + counts + ")";
    return o;
}

// Source K/V per layer in call order; the target's n-th call on a
// controlled layer must consume the source's n-th K/V for that layer.
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

class Tamper final : public AttentionHook {
public:
    void on_self_attention(SelfAttentionIO& io) override { io.k *= 1.0000001; }
};

Outcome kv_provenance() {
    Outcome o;
    const NoiseSchedule s;
    const ToyDiT dit(ToyDiTConfig{}, s);
    const auto grid = TimestepGrid::make(s, 30);
    const Tensor x_T = noise(41, dit.config().latent_shape());
    const auto policy = AttentionPolicy::defaults(s, dit.config().layers);
    const auto p = prompts("a photo of a cat", "a photo of a red dog");

    KvLog log;
    SourceKv source_hook(log);
    TargetKv target_hook(log, policy.self_layers);
    DualBranchOptions opt;
    opt.merge = MergeConfig{0.8};
    opt.source_hooks = {&source_hook};
    opt.target_after = {&target_hook};
    const auto r = run_dual_branch(x_T, x_T, grid, dit, policy, p, opt);
    const std::size_t expected = 2 * grid.steps() * policy.self_layers.size();

    // Negative control: the same hooks must flag foreign keys.
    KvLog tampered;
    SourceKv source_hook2(tampered);
    TargetKv target_hook2(tampered, policy.self_layers);
    Tamper tamper;
    DualBranchOptions opt2 = opt;
    opt2.source_hooks = {&source_hook2};
    opt2.target_after = {&tamper, &target_hook2};
    run_dual_branch(x_T, x_T, TimestepGrid::make(s, 3), dit, policy, p, opt2);

    o.pass = log.checks == expected && log.mismatches == 0 && r.kv_violations == 0 && tampered.checks > 0 &&
             tampered.mismatches == tampered.checks;
    o.detail = std::to_string(log.checks) + " checks, " + std::to_string(log.mismatches) +
               " mismatches; library audit " + std::to_string(r.kv_violations) + " violations; tamper control " +
               std::to_string(tampered.mismatches) + "/" + std::to_string(tampered.checks) + " flagged";
    return o;
}

Outcome merging_correctness() {
    Outcome o;
    // r = 0 against plain attention, and plain attention against the naive reference.
    std::size_t bitwise = 0, zero_cases = 0;
    double naive_err = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed);
        const Tensor x = gaussian({64, 16}, rng);
        const Tensor wq = gaussian({16, 16}, rng), wk = gaussian({16, 16}, rng), wv = gaussian({16, 16}, rng);
        for (std::size_t heads : {1u, 2u, 4u}) {
            ++zero_cases;
            const Tensor plain = plain_attention(x, wq, wk, wv, heads);
            bitwise += merged_attention(x, wq, wk, wv, MergeConfig{0.0}, heads) == plain ? 1 : 0;
            naive_err = std::max(naive_err, max_abs_diff(plain, oracle::naive_mha(x, wq, wk, wv, heads)));
        }
    }

    // Rows 2k+1 duplicate rows 2k.
    double dup_err = 0;
    for (std::uint64_t seed = 10; seed < 20; ++seed) {
        Rng rng(seed);
        Tensor x = gaussian({64, 16}, rng);
        for (std::size_t i = 1; i < 64; i += 2)
            for (std::size_t c = 0; c < 16; ++c) x(i, c) = x(i - 1, c);
        const Tensor wq = gaussian({16, 16}, rng), wk = gaussian({16, 16}, rng), wv = gaussian({16, 16}, rng);
        for (auto sim : {MergeSimilarity::key_cosine, MergeSimilarity::value_cosine}) {
            const Tensor got = merged_attention(x, wq, wk, wv, MergeConfig{1.0, sim}, 4);
            dup_err = std::max(dup_err, max_abs_diff(got, oracle::naive_mha(x, wq, wk, wv, 4)));
        }
    }

    // Partition integrity.
    Rng rng(11);
    std::size_t fuzz_ok = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng.next_u64() % 255;
        const std::size_t d = 1 + rng.next_u64() % 8;
        const MergeConfig c{rng.uniform()};
        const Tensor x = gaussian({n, d}, rng);
        const auto plan = build_plan(x, c);
        bool ok = plan.group_count() == n - c.merged_pairs(n);
        std::vector<int> seen(n, 0);
        for (std::size_t g = 0; g < plan.group_count(); ++g) {
            const auto& members = plan.groups()[g];
            std::size_t evens = 0;
            for (auto t : members) {
                if (t < n) ++seen[t];
                evens += t % 2 == 0 ? 1 : 0;
            }
            if (members.size() > 1 && evens != 1) ok = false;
            if (g > 0 && !(plan.representative(g - 1) < plan.representative(g))) ok = false;
        }
        for (int v : seen) ok = ok && v == 1;
        const Tensor back = unmerge(merge(x, plan), plan);
        ok = ok && back.dim(0) == n && back.dim(1) == d;
        for (std::size_t i = 0; ok && i < n; ++i) {
            const auto& members = plan.groups()[plan.group_of(i)];
            for (std::size_t col = 0; col < d; ++col) {
                double mean = 0;
                for (auto t : members) mean += x(t, col);
                mean /= static_cast<double>(members.size());
                if (std::abs(back(i, col) - mean) > 1e-12) ok = false;
            }
        }
        fuzz_ok += ok ? 1 : 0;
    }
    o.pass = bitwise == zero_cases && naive_err < 1e-12 && dup_err < kDuplicateTol && fuzz_ok == 1000;
    o.detail = "r=0 " + std::to_string(bitwise) + "/" + std::to_string(zero_cases) + " bitwise (naive ref " +
               fmt(naive_err) + "); duplicates " + fmt(dup_err) + "; fuzz " + std::to_string(fuzz_ok) + "/1000";
    return o;
}

Outcome merging_speed() {
    const auto t0 = Clock::now();
    Outcome o;
    MergeBenchOptions opt;
    opt.tokens = 1024;
    opt.dim = 64;
    opt.iters = 100;
    const auto rows = bench_merge({0.0, 0.8}, opt);
    const double speedup = rows[0].mean_ms / rows[1].mean_ms;
    const double secs = seconds_since(t0);
    o.pass = speedup >= kSpeedup && secs < kBenchSeconds;
    o.detail = "r=0 " + fmt(rows[0].mean_ms) + " ms, r=0.8 " + fmt(rows[1].mean_ms) + " ms, speedup " +
               fmt(speedup) + "x; " + fmt(secs) + " s";
    return o;
}

Outcome psnr_metric() {
    Outcome o;
    double worst = 0;
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        ToyImage a(4 + trial, 3 + trial % 5, trial % 2 ? 3 : 1), b = a;
        for (std::size_t k = 0; k < a.pixels.size(); ++k) {
            a.pixels[k] = 0.9 * rng.uniform();
            b.pixels[k] = a.pixels[k] + 0.1;
        }
        worst = std::max({worst, std::abs(psnr(a, b) - 20.0), std::abs(psnr(b, a) - 20.0)});
    }
    o.pass = worst <= kPsnrTol;
    o.detail = "max |psnr - 20| over 20 pairs " + fmt(worst) + " dB";
    return o;
}

Outcome determinism() {
    Outcome o;
    namespace fs = std::filesystem;
    const fs::path dir = fs::current_path() / "acceptance_cli";
    fs::create_directories(dir);
    auto run = [&](const std::string& tag) {
        const std::string cmd = std::string("\"") + LATENTEDIT_CLI_PATH + "\" --seed 5 edit --source \"a photo of a cat\"" +
                                " --target \"a photo of a dog\" --out \"" + (dir / (tag + ".ppm")).string() +
                                "\" --recon \"" + (dir / (tag + "_recon.ppm")).string() + "\" --report \"" +
                                (dir / (tag + ".txt")).string() + "\"";
        return std::system(cmd.c_str());
    };
    const int s1 = run("a"), s2 = run("b");
    bool same = s1 == 0 && s2 == 0;
    std::size_t bytes = 0;
    for (const char* suffix : {".ppm", "_recon.ppm", ".txt"}) {
        const auto a = file_bytes(dir / (std::string("a") + suffix));
        const auto b = file_bytes(dir / (std::string("b") + suffix));
        same = same && !a.empty() && a == b;
        bytes += a.size();
    }
    fs::remove_all(dir);
    o.pass = same;
    o.detail = "exit codes " + std::to_string(s1) + "," + std::to_string(s2) + "; " + std::to_string(bytes) +
               " bytes compared across image, reconstruction and report";
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"solver order", solver_order},
        {"ddim reduction", ddim_reduction},
        {"few-step accuracy", few_step},
        {"inversion fidelity", inversion_fidelity},
        {"inversion versus ddim", inversion_superiority},
        {"attention-control identity", attention_identity},
        {"k/v provenance", kv_provenance},
        {"patch merging correctness", merging_correctness},
        {"patch merging speed", merging_speed},
        {"psnr metric", psnr_metric},
        {"determinism", determinism},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::printf("[%s] %zu %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(),
                    o.detail.c_str());
        std::fflush(stdout);
    }
    return failed;
}
