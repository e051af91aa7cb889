// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "latentedit/attention_control.hpp"
#include "latentedit/image.hpp"
#include "latentedit/inversion.hpp"
#include "latentedit/toy_dit.hpp"

namespace latentedit {

struct EditRequest {
    // Input image; a synthetic picture from image_seed is used when absent.
    std::optional<std::filesystem::path> input;
    std::uint64_t image_seed = 0;
    std::size_t image_factor = 2;  // image pixels per latent pixel side

    std::string source_prompt;
    std::string target_prompt;

    SolverKind solver = SolverKind::dpm2m;
    std::size_t steps = 30;
    double guidance = 4.5;
    GridSpacing spacing = GridSpacing::uniform_lambda;
    NoiseSchedule::Params schedule{};
    ToyDiTConfig model{};

    // Defaults to AttentionPolicy::defaults for the model depth.
    std::optional<AttentionPolicy> policy;
    // Applied to the dual-branch sampling; inversion always runs unmerged.
    MergeConfig merge{0.8, MergeSimilarity::key_cosine};
    InversionConfig inversion{};

    bool record_wall_time = false;

    void validate() const;
};

struct EditReport {
    std::size_t steps = 0;
    double guidance = 0.0;
    double merge_ratio = 0.0;
    double roundtrip_error = 0.0;
    bool inversion_converged = true;
    std::vector<double> residuals;
    std::vector<std::size_t> iterations;
    std::size_t q_src_uses = 0;
    std::size_t q_tar_uses = 0;
    std::size_t controlled_layers = 0;
    std::uint64_t attention_macs = 0;
    std::uint64_t tokens_in = 0;
    std::uint64_t tokens_out = 0;
    std::uint64_t evaluations = 0;
    std::size_t kv_checks = 0;
    std::size_t kv_violations = 0;
    double psnr_edit_vs_input = 0.0;
    double psnr_reconstruction_vs_input = 0.0;
    std::optional<double> wall_seconds;

    /// key=value lines; numbers are printed with round-trip precision.
    std::string to_text() const;
};

struct EditResult {
    ToyImage input;          // decode(encode(input)): what the latent can represent
    ToyImage reconstructed;  // source branch
    ToyImage edited;         // target branch
    Tensor inverted;         // shared starting latent
    EditReport report;
};

/// encode -> DPM inversion under the source prompt (w = 1) -> dual-branch
/// controlled sampling at the requested guidance -> decode. Throws
/// NumericalFailure if any latent goes non-finite.
EditResult edit(const EditRequest& request);

}  // namespace latentedit
