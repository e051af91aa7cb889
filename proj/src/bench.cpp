// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "latentedit/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "latentedit/errors.hpp"
#include "latentedit/rng.hpp"

namespace latentedit {

std::vector<MergeBenchRow> bench_merge(const std::vector<double>& ratios, const MergeBenchOptions& options) {
    if (options.tokens == 0 || options.dim == 0 || options.iters == 0) {
        throw InvalidArgument("bench merge: tokens, dim and iters must be positive");
    }
    if (options.dim % options.heads != 0) throw InvalidArgument("bench merge: dim must be divisible by heads");
    Rng rng(options.seed);
    const Tensor x = gaussian({options.tokens, options.dim}, rng);
    const double scale = 1.0 / std::sqrt(static_cast<double>(options.dim));
    const Tensor w_q = scale * gaussian({options.dim, options.dim}, rng);
    const Tensor w_k = scale * gaussian({options.dim, options.dim}, rng);
    const Tensor w_v = scale * gaussian({options.dim, options.dim}, rng);
    const Tensor reference = plain_attention(x, w_q, w_k, w_v, options.heads);

    std::vector<MergeBenchRow> rows(ratios.size());
    std::vector<MergeConfig> configs;
    for (std::size_t j = 0; j < ratios.size(); ++j) {
        configs.push_back({ratios[j], options.similarity});
        configs.back().validate();
        rows[j].ratio = ratios[j];
        MacCounter cost;
        const Tensor out = merged_attention(x, w_q, w_k, w_v, configs[j], options.heads, &cost);
        rows[j].max_deviation = max_abs_diff(out, reference);
        rows[j].macs = cost.macs;
    }
    std::vector<double> total(ratios.size(), 0.0);
    for (std::size_t it = 0; it < options.iters; ++it) {
        for (std::size_t j = 0; j < ratios.size(); ++j) {
            const auto start = std::chrono::steady_clock::now();
            const Tensor out = merged_attention(x, w_q, w_k, w_v, configs[j], options.heads);
            total[j] += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            if (out.empty()) throw NumericalFailure("bench merge: empty output");
        }
    }
    for (std::size_t j = 0; j < ratios.size(); ++j) rows[j].mean_ms = total[j] / static_cast<double>(options.iters);
    return rows;
}

std::string merge_bench_csv(const std::vector<MergeBenchRow>& rows) {
    std::string out = "ratio,mean_latency_ms,max_deviation\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.3f,%.6f,%.6e\n", r.ratio, r.mean_ms, r.max_deviation);
        out += buf;
    }
    return out;
}

}  // namespace latentedit
