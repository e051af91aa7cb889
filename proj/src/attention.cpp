// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "latentedit/attention.hpp"

#include <algorithm>
#include <cmath>

#include "latentedit/errors.hpp"

namespace latentedit {

namespace {

void require_rank3(const Tensor& t, const char* what) {
    if (t.rank() != 3) throw InvalidShape(std::string(what) + ": expected [H x N x c], got " + shape_string(t.shape()));
}

void set_head(Tensor& dst, std::size_t h, const Tensor& src) {
    auto out = dst.row(h);
    std::copy(src.data().begin(), src.data().end(), out.begin());
}

}  // namespace

Tensor split_heads(const Tensor& x, std::size_t heads) {
    if (x.rank() != 2) throw InvalidShape("split_heads: expected [N x d]");
    const std::size_t n = x.dim(0), d = x.dim(1);
    if (heads == 0 || d % heads != 0) throw InvalidShape("split_heads: width not divisible by head count");
    const std::size_t dh = d / heads;
    Tensor out({heads, n, dh});
    for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < dh; ++c) out[(h * n + i) * dh + c] = x(i, h * dh + c);
    return out;
}

Tensor merge_heads(const Tensor& x) {
    require_rank3(x, "merge_heads");
    const std::size_t heads = x.dim(0), n = x.dim(1), dh = x.dim(2);
    Tensor out({n, heads * dh});
    for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < dh; ++c) out(i, h * dh + c) = x[(h * n + i) * dh + c];
    return out;
}

Tensor head_slice(const Tensor& x, std::size_t h) {
    require_rank3(x, "head_slice");
    auto src = x.row(h);
    return Tensor({x.dim(1), x.dim(2)}, std::vector<double>(src.begin(), src.end()));
}

Tensor attention_probs(const Tensor& q, const Tensor& k, MacCounter* cost) {
    require_rank3(q, "attention_probs");
    require_rank3(k, "attention_probs");
    if (q.dim(0) != k.dim(0) || q.dim(2) != k.dim(2)) {
        throw InvalidShape("attention_probs: Q " + shape_string(q.shape()) + " incompatible with K " +
                           shape_string(k.shape()));
    }
    const std::size_t heads = q.dim(0), nq = q.dim(1), nk = k.dim(1), dh = q.dim(2);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Tensor out({heads, nq, nk});
    for (std::size_t h = 0; h < heads; ++h) {
        set_head(out, h, softmax_rows(matmul_nt(head_slice(q, h), head_slice(k, h)), scale));
    }
    if (cost) cost->add(static_cast<std::uint64_t>(heads) * nq * nk * dh);
    return out;
}

Tensor apply_attention(const Tensor& probs, const Tensor& v, MacCounter* cost) {
    require_rank3(probs, "apply_attention");
    require_rank3(v, "apply_attention");
    if (probs.dim(0) != v.dim(0) || probs.dim(2) != v.dim(1)) {
        throw InvalidShape("apply_attention: probs " + shape_string(probs.shape()) + " incompatible with V " +
                           shape_string(v.shape()));
    }
    const std::size_t heads = probs.dim(0), nq = probs.dim(1), nk = probs.dim(2), dv = v.dim(2);
    Tensor out({heads, nq, dv});
    for (std::size_t h = 0; h < heads; ++h) set_head(out, h, matmul(head_slice(probs, h), head_slice(v, h)));
    if (cost) cost->add(static_cast<std::uint64_t>(heads) * nq * nk * dv);
    return out;
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, MacCounter* cost) {
    return apply_attention(attention_probs(q, k, cost), v, cost);
}

}  // namespace latentedit
