// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "latentedit/tensor.hpp"

namespace latentedit {

// D4LT latent file: "D4LT", u32 LE rank, rank x u32 LE extents, f64 LE payload.
std::vector<std::uint8_t> encode_d4lt(const Tensor& t);
Tensor decode_d4lt(const std::vector<std::uint8_t>& bytes);

void write_d4lt(const std::filesystem::path& path, const Tensor& t);
Tensor read_d4lt(const std::filesystem::path& path);

}  // namespace latentedit
