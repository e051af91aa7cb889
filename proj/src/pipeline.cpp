// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "latentedit/pipeline.hpp"

#include <charconv>
#include <chrono>
#include <sstream>

#include "latentedit/errors.hpp"

namespace latentedit {

namespace {

// Shortest representation that reads back to the same double.
std::string num(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

template <typename T>
std::string join(const std::vector<T>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        if constexpr (std::is_floating_point_v<T>) {
            out += num(values[i]);
        } else {
            out += std::to_string(values[i]);
        }
    }
    return out;
}

void require_finite(const Tensor& x, const char* what) {
    if (!all_finite(x)) throw NumericalFailure(std::string(what) + " contains non-finite values");
}

}  // namespace

void EditRequest::validate() const {
    if (source_prompt.empty() || target_prompt.empty()) throw InvalidArgument("prompts must be non-empty");
    if (steps < 2) throw InvalidArgument("steps must be at least 2");
    if (!(guidance >= 0.0)) throw InvalidArgument("guidance weight must be non-negative");
    if (solver == SolverKind::rk4_oracle) throw InvalidArgument("edit needs a grid solver (ddim or dpm2m)");
    if (image_factor == 0) throw InvalidArgument("image factor must be positive");
    model.validate();
    merge.validate();
    inversion.validate();
}

std::string EditReport::to_text() const {
    std::ostringstream os;
    os << "steps=" << steps << '\n';
    os << "guidance=" << num(guidance) << '\n';
    os << "merge_ratio=" << num(merge_ratio) << '\n';
    os << "roundtrip_error=" << num(roundtrip_error) << '\n';
    os << "inversion_converged=" << (inversion_converged ? "true" : "false") << '\n';
    os << "inversion_residuals=" << join(residuals) << '\n';
    os << "inversion_iterations=" << join(iterations) << '\n';
    os << "q_src_uses=" << q_src_uses << '\n';
    os << "q_tar_uses=" << q_tar_uses << '\n';
    os << "controlled_layers=" << controlled_layers << '\n';
    os << "kv_checks=" << kv_checks << '\n';
    os << "kv_violations=" << kv_violations << '\n';
    os << "attention_macs=" << attention_macs << '\n';
    os << "tokens_in=" << tokens_in << '\n';
    os << "tokens_out=" << tokens_out << '\n';
    os << "evaluations=" << evaluations << '\n';
    os << "psnr_edit_vs_input=" << format_psnr(psnr_edit_vs_input) << '\n';
    os << "psnr_reconstruction_vs_input=" << format_psnr(psnr_reconstruction_vs_input) << '\n';
    if (wall_seconds) os << "wall_seconds=" << num(*wall_seconds) << '\n';
    return os.str();
}

EditResult edit(const EditRequest& request) {
    request.validate();
    const auto started = std::chrono::steady_clock::now();

    const std::size_t image_side = request.model.grid * request.image_factor;
    ToyImage input = request.input ? read_image(*request.input)
                                   : synthetic_image(request.image_seed, image_side, request.model.channels);
    const Tensor z0 = encode_image(input, request.image_factor);
    if (z0.shape() != request.model.latent_shape()) {
        throw InvalidShape("encoded image " + shape_string(z0.shape()) + " does not match the model latent " +
                           shape_string(request.model.latent_shape()));
    }

    const NoiseSchedule schedule(request.schedule);
    const TimestepGrid grid = TimestepGrid::make(schedule, request.steps, request.spacing);
    const ToyDiT model(request.model);
    const AttentionPolicy policy = request.policy.value_or(AttentionPolicy::defaults(schedule, request.model.layers));
    policy.validate(schedule, request.model.layers);

    const PromptEmbedding source = encode_prompt(request.source_prompt, request.model.text_dim);
    const PromptEmbedding target = encode_prompt(request.target_prompt, request.model.text_dim);
    const PromptEmbedding uncond = PromptEmbedding::unconditional(request.model.text_dim);

    EditResult result;
    EditReport& report = result.report;

    // Inversion runs unmerged: a merge plan rebuilt from each iterate makes the
    // fixed-point map discontinuous.
    EvalStats inversion_stats;
    EvalContext inversion_ctx{{}, MergeConfig{0.0, request.merge.similarity}, &inversion_stats};
    InversionConfig inv = request.inversion;
    inv.steps = request.steps;
    const RoundTripResult rt = roundtrip_error(z0, grid, bind_model(model, source, &inversion_ctx),
                                               InversionMethod::dpm, inv);
    const Tensor& x_T = rt.trace.noise();
    require_finite(x_T, "inverted latent");

    DualBranchOptions options;
    options.solver = request.solver;
    options.guidance = request.guidance;
    options.merge = request.merge;
    const DualBranchResult dual = run_dual_branch(x_T, x_T, grid, model, policy, {source, target, uncond}, options);
    require_finite(dual.x0_src, "reconstruction latent");
    require_finite(dual.x0_tar, "edited latent");

    result.input = decode_latent(z0, request.image_factor);
    result.reconstructed = decode_latent(dual.x0_src, request.image_factor);
    result.edited = decode_latent(dual.x0_tar, request.image_factor);
    result.inverted = x_T;

    report.steps = request.steps;
    report.guidance = request.guidance;
    report.merge_ratio = request.merge.ratio;
    report.roundtrip_error = rt.error;
    report.inversion_converged = rt.trace.converged;
    report.residuals = rt.trace.residuals;
    report.iterations = rt.trace.iterations;
    report.q_src_uses = dual.q_src_uses;
    report.q_tar_uses = dual.q_tar_uses;
    report.controlled_layers = policy.self_layers.size();
    report.kv_checks = dual.kv_checks;
    report.kv_violations = dual.kv_violations;
    report.attention_macs = inversion_stats.attention.macs + dual.stats.attention.macs;
    report.tokens_in = inversion_stats.tokens_in + dual.stats.tokens_in;
    report.tokens_out = inversion_stats.tokens_out + dual.stats.tokens_out;
    report.evaluations = inversion_stats.evaluations + dual.stats.evaluations;
    report.psnr_edit_vs_input = psnr(result.edited, result.input);
    report.psnr_reconstruction_vs_input = psnr(result.reconstructed, result.input);
    if (request.record_wall_time) {
        report.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    }
    return result;
}

}  // namespace latentedit
