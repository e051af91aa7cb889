// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: sample, invert, edit, bench merge, metrics psnr.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "latentedit/bench.hpp"
#include "latentedit/errors.hpp"
#include "latentedit/latent_io.hpp"
#include "latentedit/pipeline.hpp"
#include "latentedit/rng.hpp"

using namespace latentedit;

namespace {

struct GlobalOptions {
    std::uint64_t seed = 0;
    std::uint64_t model_seed = 0;
    std::size_t steps = 30;
    double cfg = 4.5;
    std::size_t grid = 8;
    std::size_t layers = 6;
    std::size_t heads = 4;
    std::size_t width = 64;
    double beta0 = 0.1;
    double beta1 = 20.0;
    double t_min = 1e-3;
    std::string spacing = "uniform-lambda";
    std::size_t factor = 2;

    NoiseSchedule::Params schedule() const { return {beta0, beta1, t_min, 1.0}; }
    ToyDiTConfig model() const {
        ToyDiTConfig c;
        c.grid = grid;
        c.layers = layers;
        c.heads = heads;
        c.width = width;
        c.seed = model_seed;
        return c;
    }
};

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
}

ToyImage load_or_synthesize(const std::string& input, const GlobalOptions& g) {
    if (!input.empty()) return read_image(input);
    return synthetic_image(g.seed, g.grid * g.factor);
}

int run_sample(const GlobalOptions& g, const std::string& prompt, const std::string& solver, const std::string& out,
               const std::string& image_out) {
    const NoiseSchedule schedule(g.schedule());
    const ToyDiT model(g.model(), schedule);
    const auto grid = TimestepGrid::make(schedule, g.steps, parse_spacing(g.spacing));
    Rng rng(g.seed);
    const Tensor x_T = gaussian(model.config().latent_shape(), rng);
    const PromptEmbedding cond = encode_prompt(prompt);
    const PromptEmbedding uncond = PromptEmbedding::unconditional(kDefaultTextDim);
    const Tensor x0 = sample(x_T, grid, bind_guided(model, cond, uncond, g.cfg), parse_solver(solver));
    if (!all_finite(x0)) throw NumericalFailure("sampled latent is not finite");
    write_d4lt(out, x0);
    if (!image_out.empty()) write_image(image_out, decode_latent(x0, g.factor));
    return 0;
}

int run_invert(const GlobalOptions& g, const std::string& input, const std::string& prompt, const std::string& mode,
               const InversionConfig& config, const std::string& out, const std::string& report) {
    const NoiseSchedule schedule(g.schedule());
    const ToyDiT model(g.model(), schedule);
    const auto grid = TimestepGrid::make(schedule, g.steps, parse_spacing(g.spacing));
    const Tensor z0 = encode_image(load_or_synthesize(input, g), g.factor);
    InversionConfig cfg = config;
    cfg.steps = g.steps;
    const RoundTripResult rt =
        roundtrip_error(z0, grid, bind_model(model, encode_prompt(prompt)), parse_inversion_method(mode), cfg);
    if (!all_finite(rt.trace.noise())) throw NumericalFailure("inverted latent is not finite");
    write_d4lt(out, rt.trace.noise());
    std::ostringstream os;
    os << "mode=" << mode << '\n';
    os << "steps=" << g.steps << '\n';
    os << "roundtrip_error=" << rt.error << '\n';
    os << "converged=" << (rt.trace.converged ? "true" : "false") << '\n';
    if (!rt.trace.residuals.empty()) os << "max_residual=" << rt.trace.max_residual() << '\n';
    write_text(report, os.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diffusion-transformer image editing toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--seed", g.seed, "Noise / synthetic image seed");
    app.add_option("--model-seed", g.model_seed, "Toy model weight seed");
    app.add_option("--steps", g.steps, "Solver steps")->check(CLI::Range(std::size_t{1}, std::size_t{100000}));
    app.add_option("--cfg", g.cfg, "Classifier-free guidance weight")->check(CLI::NonNegativeNumber);
    app.add_option("--grid", g.grid, "Latent grid side")->check(CLI::PositiveNumber);
    app.add_option("--layers", g.layers, "Transformer layers")->check(CLI::PositiveNumber);
    app.add_option("--heads", g.heads, "Attention heads")->check(CLI::PositiveNumber);
    app.add_option("--width", g.width, "Token width")->check(CLI::PositiveNumber);
    app.add_option("--beta0", g.beta0, "Schedule beta0");
    app.add_option("--beta1", g.beta1, "Schedule beta1");
    app.add_option("--t-min", g.t_min, "Smallest diffusion time");
    app.add_option("--spacing", g.spacing, "Grid spacing")->check(CLI::IsMember({"uniform-t", "uniform-lambda"}));
    app.add_option("--factor", g.factor, "Image pixels per latent pixel side")->check(CLI::PositiveNumber);

    // sample
    auto* sample_cmd = app.add_subcommand("sample", "Generate a latent from noise");
    std::string prompt, solver = "dpm2m", out, image_out;
    sample_cmd->add_option("--prompt", prompt, "Text prompt")->required();
    sample_cmd->add_option("--solver", solver, "ddim | dpm2m | rk4")->check(CLI::IsMember({"ddim", "dpm2m", "rk4"}));
    sample_cmd->add_option("--out", out, "Output latent (.d4lt)")->required();
    sample_cmd->add_option("--image", image_out, "Also write the decoded image");

    // invert
    auto* invert_cmd = app.add_subcommand("invert", "Invert an image to a noise latent");
    std::string input, mode = "dpm", estimate = "assisted", report;
    InversionConfig inv;
    invert_cmd->add_option("--input", input, "Input PPM/PGM (synthetic image from --seed if omitted)");
    invert_cmd->add_option("--prompt", prompt, "Text prompt")->required();
    invert_cmd->add_option("--mode", mode, "dpm | ddim")->check(CLI::IsMember({"dpm", "ddim"}));
    invert_cmd->add_option("--estimate", estimate, "assisted | history")->check(CLI::IsMember({"assisted", "history"}));
    invert_cmd->add_option("--rho", inv.rho, "Fixed-point gain in (0, 1]");
    invert_cmd->add_option("--max-iters", inv.max_fp_iters, "Fixed-point iteration cap");
    invert_cmd->add_option("--tol", inv.fp_tol, "Fixed-point residual tolerance");
    invert_cmd->add_option("--out", out, "Output latent (.d4lt)")->required();
    invert_cmd->add_option("--report", report, "Report file (stdout if omitted)");

    // edit
    auto* edit_cmd = app.add_subcommand("edit", "Edit an image from a source to a target prompt");
    std::string source, target, recon_out, cross_mode = "refine", similarity = "key-cosine";
    double ratio = 0.8;
    std::optional<double> s_threshold, cross_until;
    std::vector<std::size_t> self_layers;
    bool wall_time = false;
    edit_cmd->add_option("--input", input, "Input PPM/PGM (synthetic image from --seed if omitted)");
    edit_cmd->add_option("--source", source, "Source prompt")->required();
    edit_cmd->add_option("--target", target, "Target prompt")->required();
    edit_cmd->add_option("--out", out, "Edited image")->required();
    edit_cmd->add_option("--recon", recon_out, "Reconstruction image");
    edit_cmd->add_option("--report", report, "Report file (stdout if omitted)");
    edit_cmd->add_option("--solver", solver, "ddim | dpm2m")->check(CLI::IsMember({"ddim", "dpm2m"}));
    edit_cmd->add_option("--ratio", ratio, "Patch merging ratio")->check(CLI::Range(0.0, 1.0));
    edit_cmd->add_option("--similarity", similarity, "key-cosine | value-cosine")
        ->check(CLI::IsMember({"key-cosine", "value-cosine"}));
    edit_cmd->add_option("--cross-mode", cross_mode, "replace | refine | off")
        ->check(CLI::IsMember({"replace", "refine", "off"}));
    edit_cmd->add_option("--s-threshold", s_threshold, "Source query used while t > S");
    edit_cmd->add_option("--cross-until", cross_until, "Cross-attention maps edited while t > this");
    edit_cmd->add_option("--self-layers", self_layers, "Controlled self-attention layers")->delimiter(',');
    edit_cmd->add_option("--estimate", estimate, "assisted | history")->check(CLI::IsMember({"assisted", "history"}));
    edit_cmd->add_option("--rho", inv.rho, "Fixed-point gain in (0, 1]");
    edit_cmd->add_option("--max-iters", inv.max_fp_iters, "Fixed-point iteration cap");
    edit_cmd->add_flag("--wall-time", wall_time, "Include wall time in the report (breaks byte-identity)");

    // bench merge
    auto* bench_cmd = app.add_subcommand("bench", "Benchmarks");
    bench_cmd->require_subcommand(1);
    auto* bench_merge_cmd = bench_cmd->add_subcommand("merge", "Merged vs unmerged attention latency");
    MergeBenchOptions bench;
    double bench_ratio = 0.8;
    bench_merge_cmd->add_option("--n", bench.tokens, "Tokens")->check(CLI::PositiveNumber);
    bench_merge_cmd->add_option("--dim", bench.dim, "Token width")->check(CLI::PositiveNumber);
    bench_merge_cmd->add_option("--ratio", bench_ratio, "Merging ratio")->check(CLI::Range(0.0, 1.0));
    bench_merge_cmd->add_option("--iters", bench.iters, "Timed iterations")->check(CLI::PositiveNumber);
    bench_merge_cmd->add_option("--bench-heads", bench.heads, "Attention heads")->check(CLI::PositiveNumber);

    // metrics psnr
    auto* metrics_cmd = app.add_subcommand("metrics", "Image metrics");
    metrics_cmd->require_subcommand(1);
    auto* psnr_cmd = metrics_cmd->add_subcommand("psnr", "PSNR between two images");
    std::string image_a, image_b;
    psnr_cmd->add_option("a", image_a, "First image")->required();
    psnr_cmd->add_option("b", image_b, "Second image")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*sample_cmd) return run_sample(g, prompt, solver, out, image_out);
        if (*invert_cmd) {
            inv.estimate = parse_estimate_mode(estimate);
            return run_invert(g, input, prompt, mode, inv, out, report);
        }
        if (*edit_cmd) {
            EditRequest req;
            if (!input.empty()) req.input = input;
            req.image_seed = g.seed;
            req.image_factor = g.factor;
            req.source_prompt = source;
            req.target_prompt = target;
            req.solver = parse_solver(solver);
            req.steps = g.steps;
            req.guidance = g.cfg;
            req.spacing = parse_spacing(g.spacing);
            req.schedule = g.schedule();
            req.model = g.model();
            const NoiseSchedule schedule(req.schedule);
            AttentionPolicy policy = AttentionPolicy::defaults(schedule, g.layers);
            policy.cross_mode = parse_cross_mode(cross_mode);
            if (s_threshold) policy.s_threshold = *s_threshold;
            if (cross_until) policy.cross_until = *cross_until;
            if (!self_layers.empty()) policy.self_layers = {self_layers.begin(), self_layers.end()};
            req.policy = policy;
            req.merge = {ratio, parse_similarity(similarity)};
            inv.estimate = parse_estimate_mode(estimate);
            req.inversion = inv;
            req.record_wall_time = wall_time;
            const EditResult result = edit(req);
            write_image(out, result.edited);
            if (!recon_out.empty()) write_image(recon_out, result.reconstructed);
            write_text(report, result.report.to_text());
            return 0;
        }
        if (*bench_merge_cmd) {
            bench.seed = g.seed;
            std::cout << merge_bench_csv(bench_merge({0.0, bench_ratio}, bench));
            return 0;
        }
        if (*psnr_cmd) {
            std::cout << format_psnr(psnr(read_image(image_a), read_image(image_b))) << '\n';
            return 0;
        }
    } catch (const NumericalFailure& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
