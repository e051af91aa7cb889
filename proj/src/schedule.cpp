// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "latentedit/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "latentedit/errors.hpp"

namespace latentedit {

namespace {

// Relative slack for domain checks, so grid endpoints recomputed through
// t_of_lambda are not rejected for a last-bit difference.
constexpr double kDomainSlack = 1e-12;

// log(1 + e^x) without overflow.
double softplus(double x) {
    return x > 30.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

NoiseSchedule::NoiseSchedule(Params params) : p_(params) {
    if (!(p_.beta0 > 0.0) || !(p_.beta1 >= p_.beta0)) {
        throw InvalidArgument("schedule requires 0 < beta0 <= beta1");
    }
    if (!(p_.t_min > 0.0) || !(p_.t_max > p_.t_min)) {
        throw InvalidArgument("schedule requires 0 < t_min < t_max");
    }
}

void NoiseSchedule::check_domain(double t) const {
    const double slack = kDomainSlack * p_.t_max;
    if (!(t >= p_.t_min - slack && t <= p_.t_max + slack)) {
        throw DomainError("t=" + std::to_string(t) + " outside [" + std::to_string(p_.t_min) + ", " +
                          std::to_string(p_.t_max) + "]");
    }
}

double NoiseSchedule::log_alpha(double t) const {
    check_domain(t);
    return -0.25 * t * t * (p_.beta1 - p_.beta0) - 0.5 * t * p_.beta0;
}

double NoiseSchedule::alpha(double t) const { return std::exp(log_alpha(t)); }

double NoiseSchedule::sigma(double t) const {
    // 1 - alpha^2 via expm1 keeps precision near t_min.
    return std::sqrt(-std::expm1(2.0 * log_alpha(t)));
}

double NoiseSchedule::lambda(double t) const {
    const double la = log_alpha(t);
    return la - 0.5 * std::log(-std::expm1(2.0 * la));
}

double NoiseSchedule::t_of_lambda(double lam) const {
    const double lo = lambda(p_.t_max);
    const double hi = lambda(p_.t_min);
    const double slack = kDomainSlack * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
    if (!(lam >= lo - slack && lam <= hi + slack)) {
        throw DomainError("lambda=" + std::to_string(lam) + " outside [" + std::to_string(lo) + ", " +
                          std::to_string(hi) + "]");
    }
    // -2 log alpha = log(1 + e^{-2 lambda}); solve the quadratic in t with the
    // cancellation-free root.
    const double minus_two_log_alpha = softplus(-2.0 * lam);
    const double db = p_.beta1 - p_.beta0;
    const double t =
        2.0 * minus_two_log_alpha / (p_.beta0 + std::sqrt(p_.beta0 * p_.beta0 + 2.0 * db * minus_two_log_alpha));
    return std::clamp(t, p_.t_min, p_.t_max);
}

NoiseSchedule::Drift NoiseSchedule::drift_coeffs(double t) const {
    const double la = log_alpha(t);
    const double f = -0.5 * t * (p_.beta1 - p_.beta0) - 0.5 * p_.beta0;
    const double alpha2 = std::exp(2.0 * la);
    const double sigma2 = -std::expm1(2.0 * la);
    const double dsigma2_dt = -2.0 * f * alpha2;
    return {f, dsigma2_dt - 2.0 * f * sigma2};
}

Tensor forward_marginal(const NoiseSchedule& schedule, const Tensor& x0, double t, Rng& rng) {
    const double a = schedule.alpha(t);
    const double s = schedule.sigma(t);
    return lincomb(a, x0, s, gaussian(x0.shape(), rng));
}

GridSpacing parse_spacing(std::string_view name) {
    if (name == "uniform-t") return GridSpacing::uniform_t;
    if (name == "uniform-lambda") return GridSpacing::uniform_lambda;
    throw InvalidArgument("unknown grid spacing '" + std::string(name) + "'");
}

std::string_view to_string(GridSpacing spacing) {
    return spacing == GridSpacing::uniform_t ? "uniform-t" : "uniform-lambda";
}

TimestepGrid TimestepGrid::make(const NoiseSchedule& schedule, std::size_t steps, GridSpacing spacing) {
    if (steps == 0) throw InvalidArgument("timestep grid needs at least one step");
    const double t_hi = schedule.t_max();
    const double t_lo = schedule.t_min();
    const auto n = static_cast<double>(steps);
    std::vector<double> times(steps + 1);
    if (spacing == GridSpacing::uniform_t) {
        for (std::size_t i = 0; i <= steps; ++i) times[i] = t_hi - (t_hi - t_lo) * (static_cast<double>(i) / n);
    } else {
        const double l_lo = schedule.lambda(t_hi);
        const double l_hi = schedule.lambda(t_lo);
        for (std::size_t i = 0; i <= steps; ++i) {
            times[i] = schedule.t_of_lambda(l_lo + (l_hi - l_lo) * (static_cast<double>(i) / n));
        }
    }
    times.front() = t_hi;
    times.back() = t_lo;
    return TimestepGrid(schedule, std::move(times));
}

TimestepGrid TimestepGrid::from_times(const NoiseSchedule& schedule, std::vector<double> times) {
    return TimestepGrid(schedule, std::move(times));
}

TimestepGrid::TimestepGrid(const NoiseSchedule& schedule, std::vector<double> times)
    : schedule_(schedule), times_(std::move(times)) {
    if (times_.size() < 2) throw InvalidArgument("timestep grid needs at least two nodes");
    for (std::size_t i = 1; i < times_.size(); ++i) {
        if (times_[i] > times_[i - 1]) throw InvalidArgument("timestep grid must be non-increasing in t");
    }
    lambdas_.reserve(times_.size());
    alphas_.reserve(times_.size());
    sigmas_.reserve(times_.size());
    for (double t : times_) {
        lambdas_.push_back(schedule_.lambda(t));
        alphas_.push_back(schedule_.alpha(t));
        sigmas_.push_back(schedule_.sigma(t));
    }
}

double TimestepGrid::h(std::size_t i) const {
    if (i == 0 || i >= times_.size()) throw InvalidArgument("step index " + std::to_string(i) + " out of range");
    return lambdas_[i] - lambdas_[i - 1];
}

}  // namespace latentedit
