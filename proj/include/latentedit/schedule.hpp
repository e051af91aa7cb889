// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "latentedit/rng.hpp"
#include "latentedit/tensor.hpp"

namespace latentedit {

/// Continuous-time variance-preserving schedule with linear beta(t).
///
///   log alpha_t = -t^2 (beta1 - beta0) / 4 - t beta0 / 2
///   sigma_t     = sqrt(1 - alpha_t^2)
///   lambda_t    = log(alpha_t / sigma_t)          (half log-SNR)
///
/// All queries are restricted to [t_min, t_max]; t_min > 0 keeps lambda finite.
class NoiseSchedule {
public:
    struct Params {
        double beta0 = 0.1;
        double beta1 = 20.0;
        double t_min = 1e-3;
        double t_max = 1.0;
    };

    NoiseSchedule() : NoiseSchedule(Params{}) {}
    explicit NoiseSchedule(Params params);

    const Params& params() const { return p_; }
    double t_min() const { return p_.t_min; }
    double t_max() const { return p_.t_max; }

    double log_alpha(double t) const;
    double alpha(double t) const;
    double sigma(double t) const;
    double lambda(double t) const;

    /// Inverse of lambda(t) on the schedule domain (closed-form quadratic root).
    double t_of_lambda(double lam) const;

    struct Drift {
        double f;   // d log alpha / dt
        double g2;  // d sigma^2/dt - 2 f sigma^2
    };
    Drift drift_coeffs(double t) const;

private:
    void check_domain(double t) const;

    Params p_;
};

/// alpha_t * x0 + sigma_t * eps with eps drawn from rng.
Tensor forward_marginal(const NoiseSchedule& schedule, const Tensor& x0, double t, Rng& rng);

enum class GridSpacing { uniform_t, uniform_lambda };

GridSpacing parse_spacing(std::string_view name);
std::string_view to_string(GridSpacing spacing);

/// Denoising-order time nodes t_0 = t_max > t_1 > ... > t_N = t_min with
/// cached alpha, sigma and lambda per node.
class TimestepGrid {
public:
    static TimestepGrid make(const NoiseSchedule& schedule, std::size_t steps,
                             GridSpacing spacing = GridSpacing::uniform_lambda);

    /// Arbitrary non-increasing nodes. Repeated nodes are accepted so that
    /// zero-length steps can be exercised; solvers reject them where a step
    /// ratio is needed.
    static TimestepGrid from_times(const NoiseSchedule& schedule, std::vector<double> times);

    std::size_t steps() const { return times_.size() - 1; }
    std::size_t nodes() const { return times_.size(); }

    double t(std::size_t i) const { return times_.at(i); }
    double lambda(std::size_t i) const { return lambdas_.at(i); }
    double alpha(std::size_t i) const { return alphas_.at(i); }
    double sigma(std::size_t i) const { return sigmas_.at(i); }
    /// lambda(i) - lambda(i-1); defined for i >= 1.
    double h(std::size_t i) const;

    const std::vector<double>& times() const { return times_; }
    const std::vector<double>& lambdas() const { return lambdas_; }
    const NoiseSchedule& schedule() const { return schedule_; }

private:
    TimestepGrid(const NoiseSchedule& schedule, std::vector<double> times);

    NoiseSchedule schedule_;
    std::vector<double> times_;
    std::vector<double> lambdas_;
    std::vector<double> alphas_;
    std::vector<double> sigmas_;
};

}  // namespace latentedit
