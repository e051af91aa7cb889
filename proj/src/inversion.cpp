// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "latentedit/inversion.hpp"

#include <algorithm>
#include <cmath>

#include "latentedit/errors.hpp"

namespace latentedit {

InversionMethod parse_inversion_method(std::string_view name) {
    if (name == "ddim") return InversionMethod::ddim;
    if (name == "dpm") return InversionMethod::dpm;
    throw InvalidArgument("unknown inversion mode '" + std::string(name) + "'");
}

EstimateMode parse_estimate_mode(std::string_view name) {
    if (name == "assisted" || name == "ddim-assisted") return EstimateMode::ddim_assisted;
    if (name == "history" || name == "history-only") return EstimateMode::history_only;
    throw InvalidArgument("unknown estimate mode '" + std::string(name) + "'");
}

std::string_view to_string(EstimateMode mode) {
    return mode == EstimateMode::ddim_assisted ? "ddim-assisted" : "history-only";
}

void InversionConfig::validate() const {
    if (steps == 0) throw InvalidArgument("inversion needs at least one step");
    if (!(rho > 0.0 && rho <= 1.0)) throw InvalidArgument("rho must lie in (0, 1]");
    if (max_fp_iters == 0) throw InvalidArgument("max_fp_iters must be positive");
    if (!(fp_tol > 0.0)) throw InvalidArgument("fp_tol must be positive");
    if (history_depth != 1 && history_depth != 2) throw InvalidArgument("history depth must be 1 or 2");
}

double InversionTrace::max_residual() const {
    return residuals.empty() ? 0.0 : *std::max_element(residuals.begin(), residuals.end());
}

Tensor ddim_inverse_update(const TimestepGrid& grid, std::size_t i, const Tensor& x_i, const Tensor& d_i) {
    if (i == 0) throw NoPriorStep("inverse step needs i >= 1");
    const double a = grid.sigma(i - 1) / grid.sigma(i);
    const double b = grid.alpha(i) * std::expm1(-grid.h(i));
    return lincomb(a, x_i, a * b, d_i);
}

InversionTrace ddim_invert(const Tensor& x0, const TimestepGrid& grid, const DataPrediction& model) {
    const std::size_t n = grid.steps();
    InversionTrace trace;
    trace.latents.resize(n + 1);
    trace.residuals.assign(n, 0.0);
    trace.iterations.assign(n, 0);
    trace.latents[n] = x0;
    for (std::size_t i = n; i >= 1; --i) {
        trace.latents[i - 1] = ddim_inverse_update(grid, i, trace.latents[i], model(trace.latents[i], grid.t(i)));
    }
    return trace;
}

double step_ratio(const TimestepGrid& grid, std::size_t i) {
    if (i < 2) throw NoPriorStep("step ratio needs i >= 2");
    const double h = grid.h(i);
    const double h_prev = grid.h(i - 1);
    if (h == 0.0 || h_prev == 0.0) throw DegenerateGrid("zero-length step makes the step ratio undefined");
    return h_prev / h;
}

Tensor backward_euler_term(const Tensor& d_zhat, const Tensor& d_yhat_prev, const Tensor& d_yhat_prev2, double r) {
    if (r == 0.0 || !std::isfinite(r)) throw DegenerateGrid("step ratio must be finite and non-zero");
    return lincomb(1.0, d_zhat, 1.0 / (2.0 * r), d_yhat_prev - d_yhat_prev2);
}

Tensor backward_euler_term(const Tensor& zhat_prev, const Tensor& yhat_prev, const Tensor& yhat_prev2,
                           const DataPrediction& model, const TimestepGrid& grid, std::size_t i) {
    if (i == 0) throw NoPriorStep("backward Euler term needs i >= 1");
    const Tensor d_z = model(zhat_prev, grid.t(i - 1));
    if (i == 1) return d_z;
    const double r = step_ratio(grid, i);
    return backward_euler_term(d_z, model(yhat_prev, grid.t(i - 1)), model(yhat_prev2, grid.t(i - 2)), r);
}

InversionTrace dpm_invert(const Tensor& x0, const TimestepGrid& grid, const DataPrediction& model,
                          const InversionConfig& config) {
    config.validate();
    const std::size_t n = grid.steps();
    InversionTrace trace;
    trace.latents.resize(n + 1);
    trace.residuals.assign(n, 0.0);
    trace.iterations.assign(n, 0);
    trace.latents[n] = x0;
    Tensor d_next;  // model output at node i+1 from the previous outer step

    for (std::size_t i = n; i >= 1; --i) {
        const Tensor& z_i = trace.latents[i];
        const double a = grid.sigma(i) / grid.sigma(i - 1);
        const double b = -grid.alpha(i) * std::expm1(-grid.h(i));
        const Tensor d_i = model(z_i, grid.t(i));
        const bool have_next = !d_next.empty() && grid.h(i + 1) != 0.0;
        Tensor zhat = ddim_inverse_update(grid, i, z_i, d_i);

        // The sampler only uses a second model output on steps i >= 2.
        const bool high_order = config.history_depth == 2 && i >= 2;
        const double r = high_order ? step_ratio(grid, i) : 0.0;
        Tensor assisted_diff;
        if (high_order && config.estimate == EstimateMode::ddim_assisted) {
            // yhat_{i-1} is the probe itself; yhat_{i-2} one more DDIM inversion step.
            const Tensor d_y1 = model(zhat, grid.t(i - 1));
            const Tensor y2 = ddim_inverse_update(grid, i - 1, zhat, d_y1);
            assisted_diff = d_y1 - model(y2, grid.t(i - 2));
        }

        auto correction = [&](const Tensor& d_z) -> Tensor {
            if (!high_order) return d_z;
            if (config.estimate == EstimateMode::ddim_assisted) {
                return lincomb(1.0, d_z, 1.0 / (2.0 * r), assisted_diff);
            }
            // history-only: the output at node i-2 is extrapolated in lambda
            // from the current iterate and the converged latents of earlier
            // outer steps (quadratic once two of them exist, linear before).
            Tensor older = lincomb(1.0 + r, d_z, -r, d_i);
            if (have_next) {
                const double x = grid.lambda(i - 2), x0 = grid.lambda(i - 1), x1 = grid.lambda(i),
                             x2 = grid.lambda(i + 1);
                const double l0 = (x - x1) * (x - x2) / ((x0 - x1) * (x0 - x2));
                const double l1 = (x - x0) * (x - x2) / ((x1 - x0) * (x1 - x2));
                const double l2 = (x - x0) * (x - x1) / ((x2 - x0) * (x2 - x1));
                older = lincomb(l0, d_z, l1, d_i);
                older += l2 * d_next;
            }
            return backward_euler_term(d_z, d_z, older, r);
        };

        double residual = 0.0;
        std::size_t iters = 0;
        bool converged = false;
        while (true) {
            const Tensor d_prime = correction(model(zhat, grid.t(i - 1)));
            Tensor gap = lincomb(a, zhat, b, d_prime);
            gap -= z_i;
            residual = norm2(gap);
            ++iters;
            if (!std::isfinite(residual)) throw NumericalFailure("inversion diverged at step " + std::to_string(i));
            if (residual <= config.fp_tol) {
                converged = true;
                break;
            }
            if (iters > config.max_fp_iters) break;
            zhat = lincomb(1.0, zhat, -config.rho, gap);
        }
        trace.latents[i - 1] = std::move(zhat);
        trace.residuals[i - 1] = residual;
        trace.iterations[i - 1] = iters;
        trace.converged = trace.converged && converged;
        d_next = d_i;
    }
    return trace;
}

RoundTripResult roundtrip_error(const Tensor& x0, const TimestepGrid& grid, const DataPrediction& model,
                                InversionMethod method, const InversionConfig& config) {
    RoundTripResult result;
    SolverKind sampler = SolverKind::ddim;
    if (method == InversionMethod::ddim) {
        result.trace = ddim_invert(x0, grid, model);
    } else {
        result.trace = dpm_invert(x0, grid, model, config);
        sampler = config.history_depth == 2 ? SolverKind::dpm2m : SolverKind::ddim;
    }
    const Tensor recon = sample(result.trace.noise(), grid, model, sampler);
    const double err = norm2(recon - x0);
    const double ref = norm2(x0);
    if (ref == 0.0) {
        result.error = err;
        result.absolute = true;
    } else {
        result.error = err / ref;
    }
    return result;
}

}  // namespace latentedit
