// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string_view>

#include "latentedit/denoiser.hpp"
#include "latentedit/schedule.hpp"
#include "latentedit/tensor.hpp"

namespace latentedit {

enum class SolverKind { ddim, dpm2m, rk4_oracle };

SolverKind parse_solver(std::string_view name);
std::string_view to_string(SolverKind kind);

inline constexpr std::size_t kDefaultOracleSubsteps = 10000;

/// x_theta(x, t) with the prompt, guidance and evaluation context already bound.
using DataPrediction = std::function<Tensor(const Tensor&, double)>;

DataPrediction bind_model(const Denoiser& model, const PromptEmbedding& prompt, EvalContext* ctx = nullptr);
DataPrediction bind_guided(const Denoiser& model, const PromptEmbedding& cond, const PromptEmbedding& uncond,
                           double w, EvalContext* ctx = nullptr);

struct HistoryEntry {
    double lambda;
    Tensor output;
};

/// Solver position: x sits at grid node i. history holds up to the two most
/// recent model outputs, oldest first.
struct SolverState {
    Tensor x;
    std::size_t i = 0;
    std::deque<HistoryEntry> history;
};

/// First-order exponential-integrator (DDIM) update from node i-1 to node i:
///   x_i = (sigma_i / sigma_{i-1}) x_{i-1} - alpha_i (e^{-h_i} - 1) d_{i-1}
Tensor ddim_update(const TimestepGrid& grid, std::size_t i, const Tensor& x_prev, const Tensor& d_prev);

/// DPM-Solver++(2M) update from node i-1 to node i (requires i >= 2):
/// the DDIM update applied to d_{i-1} + (d_{i-1} - d_{i-2}) / (2 r_i) with
/// r_i = h_{i-1} / h_i.
Tensor dpm2m_update(const TimestepGrid& grid, std::size_t i, const Tensor& x_prev, const Tensor& d_prev,
                    const Tensor& d_prev2);

/// Advances state by one node using a model output already evaluated at the
/// current node. history_depth 1 forces the first-order update.
SolverState advance(SolverState state, const TimestepGrid& grid, Tensor model_output, SolverKind kind,
                    std::size_t history_depth = 2);

SolverState ddim_step(SolverState state, const TimestepGrid& grid, const DataPrediction& model);
SolverState dpm2m_step(SolverState state, const TimestepGrid& grid, const DataPrediction& model,
                       std::size_t history_depth = 2);

/// Integrates from t_max (x_T) to t_min with the chosen solver.
Tensor sample(const Tensor& x_T, const TimestepGrid& grid, const DataPrediction& model, SolverKind kind,
              std::size_t oracle_substeps = kDefaultOracleSubsteps);

/// Classical RK4 on the diffusion ODE in t, uniform substeps from t_max to t_min:
///   dx/dt = (f + g^2 / (2 sigma^2)) x - (alpha g^2 / (2 sigma^2)) x_theta(x, t)
Tensor rk4_oracle(const Tensor& x_T, const NoiseSchedule& schedule, const DataPrediction& model,
                  std::size_t substeps = kDefaultOracleSubsteps);

}  // namespace latentedit
