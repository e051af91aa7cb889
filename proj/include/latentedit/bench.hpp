// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "latentedit/patch_merging.hpp"

namespace latentedit {

struct MergeBenchOptions {
    std::size_t tokens = 1024;
    std::size_t dim = 64;
    std::size_t heads = 4;
    std::size_t iters = 100;
    std::uint64_t seed = 0;
    MergeSimilarity similarity = MergeSimilarity::key_cosine;
};

struct MergeBenchRow {
    double ratio = 0.0;
    double mean_ms = 0.0;
    double max_deviation = 0.0;  // against unmerged attention on the same input
    std::uint64_t macs = 0;      // per call
};

/// Times self-attention over random tokens at each ratio. Ratios are measured
/// in interleaved rounds so that clock drift affects all of them alike.
std::vector<MergeBenchRow> bench_merge(const std::vector<double>& ratios, const MergeBenchOptions& options);

std::string merge_bench_csv(const std::vector<MergeBenchRow>& rows);

}  // namespace latentedit
