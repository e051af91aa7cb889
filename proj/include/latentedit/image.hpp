// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "latentedit/tensor.hpp"

namespace latentedit {

/// Interleaved (row, column, channel) image with values in [0, 1].
struct ToyImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;
    std::vector<double> pixels;

    ToyImage() = default;
    ToyImage(std::size_t width, std::size_t height, std::size_t channels, double fill = 0.0);

    double& at(std::size_t x, std::size_t y, std::size_t c) { return pixels[(y * width + x) * channels + c]; }
    double at(std::size_t x, std::size_t y, std::size_t c) const { return pixels[(y * width + x) * channels + c]; }

    void validate() const;
    friend bool operator==(const ToyImage&, const ToyImage&) = default;
};

/// Binary PGM (1 channel) or PPM (3 channels), 8 bits per sample. Values are
/// clamped to [0, 1] and rounded to the nearest level.
std::vector<std::uint8_t> encode_pnm(const ToyImage& img);
ToyImage decode_pnm(const std::vector<std::uint8_t>& bytes);
void write_image(const std::filesystem::path& path, const ToyImage& img);
ToyImage read_image(const std::filesystem::path& path);

/// Mean-pools each factor x factor patch and maps p -> 4 (p - 1/2).
/// Result is [channels x height/factor x width/factor].
Tensor encode_image(const ToyImage& img, std::size_t factor);

/// Inverse affine map followed by nearest-neighbour upsampling.
ToyImage decode_latent(const Tensor& z, std::size_t factor);

/// Seeded test picture: a smooth colour gradient with a brighter disk.
ToyImage synthetic_image(std::uint64_t seed, std::size_t size, std::size_t channels = 3);

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 10 log10(1 / MSE) for unit pixel range; kPsnrIdentical when MSE = 0.
double psnr(const ToyImage& a, const ToyImage& b);
std::string format_psnr(double value);

}  // namespace latentedit
