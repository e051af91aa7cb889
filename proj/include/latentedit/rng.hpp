// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "latentedit/tensor.hpp"

namespace latentedit {

/// Seeded Gaussian source.
///
/// Bits come from std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Uniforms take the top 53 bits, offset by half an ulp so they lie
/// strictly inside (0, 1). Normals use the basic Box-Muller transform; both
/// outputs of each pair are consumed in order (cos branch first). The
/// std::normal_distribution is deliberately avoided because its algorithm is
/// implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t next_u64() { return engine_(); }
    double uniform();
    double normal();

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

/// Tensor of i.i.d. standard normals drawn in row-major order.
Tensor gaussian(const Tensor::Shape& shape, Rng& rng);

}  // namespace latentedit
