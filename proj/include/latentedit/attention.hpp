// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>

#include "latentedit/tensor.hpp"

namespace latentedit {

/// Multiply-accumulate tally for attention cost accounting.
struct MacCounter {
    std::uint64_t macs = 0;
    void add(std::uint64_t n) { macs += n; }
};

// [N x d] -> [H x N x d/H] and back.
Tensor split_heads(const Tensor& x, std::size_t heads);
Tensor merge_heads(const Tensor& x);

// 2-D copy of head h from an [H x N x c] tensor.
Tensor head_slice(const Tensor& x, std::size_t h);

/// softmax(Q K^T / sqrt(d_head)) per head; [H x Nq x Nk].
Tensor attention_probs(const Tensor& q, const Tensor& k, MacCounter* cost = nullptr);
/// probs [H x Nq x Nk] times V [H x Nk x dv] -> [H x Nq x dv].
Tensor apply_attention(const Tensor& probs, const Tensor& v, MacCounter* cost = nullptr);
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, MacCounter* cost = nullptr);

}  // namespace latentedit
