// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "latentedit/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "latentedit/errors.hpp"
#include "latentedit/rng.hpp"

namespace latentedit {

ToyImage::ToyImage(std::size_t w, std::size_t h, std::size_t c, double fill)
    : width(w), height(h), channels(c), pixels(w * h * c, fill) {
    validate();
}

void ToyImage::validate() const {
    if (width == 0 || height == 0) throw InvalidArgument("image dimensions must be positive");
    if (channels != 1 && channels != 3) throw InvalidArgument("image must have 1 or 3 channels");
    if (pixels.size() != width * height * channels) throw InvalidArgument("pixel count does not match dimensions");
}

std::vector<std::uint8_t> encode_pnm(const ToyImage& img) {
    img.validate();
    std::string header = std::string(img.channels == 3 ? "P6" : "P5") + "\n" + std::to_string(img.width) + " " +
                         std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + img.pixels.size());
    for (double v : img.pixels) {
        const double c = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
        out.push_back(static_cast<std::uint8_t>(std::lround(c * 255.0)));
    }
    return out;
}

namespace {

// Reads one whitespace-delimited header field, skipping comments.
std::size_t read_header_field(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
    auto is_space = [](std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
    while (pos < bytes.size()) {
        if (is_space(bytes[pos])) {
            ++pos;
        } else if (bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else {
            break;
        }
    }
    std::size_t value = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
        value = value * 10 + (bytes[pos] - '0');
        ++pos;
        if (++digits > 9) throw IoError("image header field too large");
    }
    if (digits == 0) throw IoError("malformed image header");
    return value;
}

}  // namespace

ToyImage decode_pnm(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        throw IoError("not a binary PGM/PPM image");
    }
    const std::size_t channels = bytes[1] == '6' ? 3 : 1;
    std::size_t pos = 2;
    const std::size_t w = read_header_field(bytes, pos);
    const std::size_t h = read_header_field(bytes, pos);
    const std::size_t maxval = read_header_field(bytes, pos);
    if (maxval != 255) throw IoError("only 8-bit images are supported");
    if (w == 0 || h == 0) throw IoError("image has zero size");
    ++pos;  // single whitespace before the raster
    const std::size_t n = w * h * channels;
    if (bytes.size() < pos + n) throw IoError("truncated image raster");
    ToyImage img(w, h, channels);
    for (std::size_t i = 0; i < n; ++i) img.pixels[i] = bytes[pos + i] / 255.0;
    return img;
}

void write_image(const std::filesystem::path& path, const ToyImage& img) {
    const auto bytes = encode_pnm(img);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

ToyImage read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_pnm(bytes);
}

Tensor encode_image(const ToyImage& img, std::size_t factor) {
    img.validate();
    if (factor == 0 || img.width % factor != 0 || img.height % factor != 0) {
        throw InvalidShape("image size " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                           " is not divisible by the patch factor " + std::to_string(factor));
    }
    const std::size_t gw = img.width / factor, gh = img.height / factor;
    Tensor z({img.channels, gh, gw});
    const double inv = 1.0 / static_cast<double>(factor * factor);
    for (std::size_t c = 0; c < img.channels; ++c) {
        for (std::size_t gy = 0; gy < gh; ++gy) {
            for (std::size_t gx = 0; gx < gw; ++gx) {
                double acc = 0.0;
                for (std::size_t dy = 0; dy < factor; ++dy)
                    for (std::size_t dx = 0; dx < factor; ++dx) acc += img.at(gx * factor + dx, gy * factor + dy, c);
                z[(c * gh + gy) * gw + gx] = 4.0 * (acc * inv - 0.5);
            }
        }
    }
    return z;
}

ToyImage decode_latent(const Tensor& z, std::size_t factor) {
    if (z.rank() != 3) throw InvalidShape("latent must be [C x H x W], got " + shape_string(z.shape()));
    if (factor == 0) throw InvalidArgument("patch factor must be positive");
    const std::size_t channels = z.dim(0), gh = z.dim(1), gw = z.dim(2);
    ToyImage img(gw * factor, gh * factor, channels);
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t y = 0; y < img.height; ++y) {
            for (std::size_t x = 0; x < img.width; ++x) {
                img.at(x, y, c) = z[(c * gh + y / factor) * gw + x / factor] / 4.0 + 0.5;
            }
        }
    }
    return img;
}

ToyImage synthetic_image(std::uint64_t seed, std::size_t size, std::size_t channels) {
    Rng rng(seed);
    ToyImage img(size, size, channels);
    std::vector<double> base(channels), tilt_x(channels), tilt_y(channels), disk(channels);
    for (std::size_t c = 0; c < channels; ++c) {
        base[c] = 0.3 + 0.2 * rng.uniform();
        tilt_x[c] = 0.3 * (rng.uniform() - 0.5);
        tilt_y[c] = 0.3 * (rng.uniform() - 0.5);
        disk[c] = 0.6 + 0.35 * rng.uniform();
    }
    const double cx = 0.3 + 0.4 * rng.uniform();
    const double cy = 0.3 + 0.4 * rng.uniform();
    const double radius = 0.15 + 0.1 * rng.uniform();
    const double s = static_cast<double>(size);
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            const double u = (x + 0.5) / s, v = (y + 0.5) / s;
            const bool inside = (u - cx) * (u - cx) + (v - cy) * (v - cy) < radius * radius;
            for (std::size_t c = 0; c < channels; ++c) {
                const double p = inside ? disk[c] : base[c] + tilt_x[c] * (u - 0.5) + tilt_y[c] * (v - 0.5);
                img.at(x, y, c) = std::clamp(p, 0.0, 1.0);
            }
        }
    }
    return img;
}

double psnr(const ToyImage& a, const ToyImage& b) {
    a.validate();
    b.validate();
    if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
        throw InvalidArgument("psnr: image dimensions differ");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        const double d = a.pixels[i] - b.pixels[i];
        acc += d * d;
    }
    const double mse = acc / static_cast<double>(a.pixels.size());
    if (mse == 0.0) return kPsnrIdentical;
    return -10.0 * std::log10(mse);
}

std::string format_psnr(double value) {
    if (std::isinf(value) && value > 0) return "inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", value);
    return buf;
}

}  // namespace latentedit
