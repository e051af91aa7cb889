// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "latentedit/samplers.hpp"

#include <cmath>

#include "latentedit/errors.hpp"

namespace latentedit {

SolverKind parse_solver(std::string_view name) {
    if (name == "ddim") return SolverKind::ddim;
    if (name == "dpm2m") return SolverKind::dpm2m;
    if (name == "rk4") return SolverKind::rk4_oracle;
    throw InvalidArgument("unknown solver '" + std::string(name) + "'");
}

std::string_view to_string(SolverKind kind) {
    switch (kind) {
        case SolverKind::ddim: return "ddim";
        case SolverKind::dpm2m: return "dpm2m";
        case SolverKind::rk4_oracle: return "rk4";
    }
    return "?";
}

DataPrediction bind_model(const Denoiser& model, const PromptEmbedding& prompt, EvalContext* ctx) {
    return [&model, &prompt, ctx](const Tensor& x, double t) { return model.evaluate(x, t, prompt, ctx); };
}

DataPrediction bind_guided(const Denoiser& model, const PromptEmbedding& cond, const PromptEmbedding& uncond,
                           double w, EvalContext* ctx) {
    return [&model, &cond, &uncond, w, ctx](const Tensor& x, double t) {
        return cfg_denoise(model, x, t, cond, uncond, w, ctx, ctx);
    };
}

Tensor ddim_update(const TimestepGrid& grid, std::size_t i, const Tensor& x_prev, const Tensor& d_prev) {
    if (i == 0) throw NoPriorStep("solver step needs a prior node (i >= 1)");
    if (i > grid.steps()) throw InvalidArgument("step index past the end of the grid");
    const double a = grid.sigma(i) / grid.sigma(i - 1);
    const double b = -grid.alpha(i) * std::expm1(-grid.h(i));
    return lincomb(a, x_prev, b, d_prev);
}

Tensor dpm2m_update(const TimestepGrid& grid, std::size_t i, const Tensor& x_prev, const Tensor& d_prev,
                    const Tensor& d_prev2) {
    if (i < 2) throw NoPriorStep("second-order step needs two prior nodes (i >= 2)");
    if (i > grid.steps()) throw InvalidArgument("step index past the end of the grid");
    const double h = grid.h(i);
    const double h_prev = grid.h(i - 1);
    if (h == 0.0 || h_prev == 0.0) throw DegenerateGrid("zero-length step makes the step ratio undefined");
    const double r = h_prev / h;
    // Written as d + (d - d2)/(2r) so that equal outputs give d bitwise.
    return ddim_update(grid, i, x_prev, lincomb(1.0, d_prev, 1.0 / (2.0 * r), d_prev - d_prev2));
}

SolverState advance(SolverState state, const TimestepGrid& grid, Tensor model_output, SolverKind kind,
                    std::size_t history_depth) {
    if (history_depth == 0) throw InvalidArgument("history depth must be at least 1");
    if (kind == SolverKind::rk4_oracle) throw InvalidArgument("the RK4 oracle is not a grid stepper");
    const std::size_t next = state.i + 1;
    state.history.push_back({grid.lambda(state.i), std::move(model_output)});
    while (state.history.size() > 2) state.history.pop_front();

    const bool second_order = kind == SolverKind::dpm2m && history_depth >= 2 && state.history.size() == 2;
    if (second_order) {
        state.x = dpm2m_update(grid, next, state.x, state.history[1].output, state.history[0].output);
    } else {
        state.x = ddim_update(grid, next, state.x, state.history.back().output);
    }
    state.i = next;
    return state;
}

SolverState ddim_step(SolverState state, const TimestepGrid& grid, const DataPrediction& model) {
    Tensor d = model(state.x, grid.t(state.i));
    return advance(std::move(state), grid, std::move(d), SolverKind::ddim);
}

SolverState dpm2m_step(SolverState state, const TimestepGrid& grid, const DataPrediction& model,
                       std::size_t history_depth) {
    Tensor d = model(state.x, grid.t(state.i));
    return advance(std::move(state), grid, std::move(d), SolverKind::dpm2m, history_depth);
}

Tensor sample(const Tensor& x_T, const TimestepGrid& grid, const DataPrediction& model, SolverKind kind,
              std::size_t oracle_substeps) {
    if (kind == SolverKind::rk4_oracle) return rk4_oracle(x_T, grid.schedule(), model, oracle_substeps);
    SolverState state{x_T, 0, {}};
    while (state.i < grid.steps()) {
        state = kind == SolverKind::ddim ? ddim_step(std::move(state), grid, model)
                                         : dpm2m_step(std::move(state), grid, model);
    }
    return state.x;
}

Tensor rk4_oracle(const Tensor& x_T, const NoiseSchedule& schedule, const DataPrediction& model,
                  std::size_t substeps) {
    if (substeps < 100) throw InvalidArgument("RK4 oracle needs at least 100 substeps");
    const double t0 = schedule.t_max();
    const double t1 = schedule.t_min();
    const double dt = (t1 - t0) / static_cast<double>(substeps);

    auto rhs = [&](const Tensor& x, double t) {
        const auto [f, g2] = schedule.drift_coeffs(t);
        const double s = schedule.sigma(t);
        const double lin = f + g2 / (2.0 * s * s);
        const double drive = schedule.alpha(t) * g2 / (2.0 * s * s);
        return lincomb(lin, x, -drive, model(x, t));
    };

    Tensor x = x_T;
    for (std::size_t n = 0; n < substeps; ++n) {
        const double t = t0 + static_cast<double>(n) * dt;
        const double t_half = t + 0.5 * dt;
        const double t_next = n + 1 == substeps ? t1 : t + dt;
        const Tensor k1 = rhs(x, t);
        const Tensor k2 = rhs(lincomb(1.0, x, 0.5 * dt, k1), t_half);
        const Tensor k3 = rhs(lincomb(1.0, x, 0.5 * dt, k2), t_half);
        const Tensor k4 = rhs(lincomb(1.0, x, dt, k3), t_next);
        for (std::size_t j = 0; j < x.size(); ++j) {
            x[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    return x;
}

}  // namespace latentedit
