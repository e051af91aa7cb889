// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "latentedit/samplers.hpp"

namespace latentedit {

enum class InversionMethod { ddim, dpm };
enum class EstimateMode { ddim_assisted, history_only };

InversionMethod parse_inversion_method(std::string_view name);
EstimateMode parse_estimate_mode(std::string_view name);
std::string_view to_string(EstimateMode mode);

struct InversionConfig {
    std::size_t steps = 30;
    double rho = 0.5;
    std::size_t max_fp_iters = 20;
    double fp_tol = 1e-6;
    EstimateMode estimate = EstimateMode::ddim_assisted;
    // 2 inverts DPM-Solver++(2M) sampling; 1 inverts the first-order step.
    std::size_t history_depth = 2;

    void validate() const;
};

/// Latents along the grid, node 0 (t_max) to node N (t_min = the input).
/// residuals[i-1] and iterations[i-1] belong to the solve for node i-1.
struct InversionTrace {
    std::vector<Tensor> latents;
    std::vector<double> residuals;
    std::vector<std::size_t> iterations;
    bool converged = true;

    const Tensor& noise() const { return latents.front(); }
    double max_residual() const;
};

/// Exact algebraic inverse of ddim_update with the model frozen at node i:
///   x_{i-1} = (sigma_{i-1} / sigma_i) (x_i + alpha_i (e^{-h_i} - 1) d_i)
Tensor ddim_inverse_update(const TimestepGrid& grid, std::size_t i, const Tensor& x_i, const Tensor& d_i);

/// Explicit DDIM inversion: each noisier node from the current cleaner one.
InversionTrace ddim_invert(const Tensor& x0, const TimestepGrid& grid, const DataPrediction& model);

/// d' = d_zhat + (d_yhat_prev - d_yhat_prev2) / (2 r), from model outputs.
Tensor backward_euler_term(const Tensor& d_zhat, const Tensor& d_yhat_prev, const Tensor& d_yhat_prev2, double r);

/// Same term evaluated from latents: zhat and yhat_prev at node i-1, yhat_prev2
/// at node i-2, with r_i = (lambda_{i-1} - lambda_{i-2}) / (lambda_i - lambda_{i-1}).
/// For i = 1 only the zhat evaluation is used.
Tensor backward_euler_term(const Tensor& zhat_prev, const Tensor& yhat_prev, const Tensor& yhat_prev2,
                           const DataPrediction& model, const TimestepGrid& grid, std::size_t i);

/// Step ratio r_i for i >= 2; throws DegenerateGrid on a zero-length step.
double step_ratio(const TimestepGrid& grid, std::size_t i);

/// Backward-Euler inversion of DPM-Solver++(2M) sampling.
///
/// For each step toward noise, starts from the DDIM-inversion probe and runs
/// the damped fixed point
///     zhat_{i-1} <- zhat_{i-1} - rho (z'_i - zhat_i),
///     z'_i = (sigma_i / sigma_{i-1}) zhat_{i-1} - alpha_i (e^{-h_i} - 1) d'_i,
/// until ||z'_i - zhat_i|| <= fp_tol or max_fp_iters updates. A step that does
/// not converge is recorded in the trace and the run continues.
InversionTrace dpm_invert(const Tensor& x0, const TimestepGrid& grid, const DataPrediction& model,
                          const InversionConfig& config);

struct RoundTripResult {
    double error = 0.0;
    bool absolute = false;  // set when ||x0|| = 0 and the error is not normalized
    InversionTrace trace;
};

/// ||sample(invert(x0)) - x0|| / ||x0||. DDIM inversion is paired with the DDIM
/// sampler, DPM inversion with DPM-Solver++(2M) (or DDIM for history_depth 1).
RoundTripResult roundtrip_error(const Tensor& x0, const TimestepGrid& grid, const DataPrediction& model,
                                InversionMethod method, const InversionConfig& config = {});

}  // namespace latentedit
