// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "latentedit/latent_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "latentedit/errors.hpp"

namespace latentedit {

namespace {

constexpr char kMagic[4] = {'D', '4', 'L', 'T'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    std::uint64_t take(int n) {
        if (pos_ + static_cast<std::size_t>(n) > bytes_.size()) throw IoError("D4LT: truncated file");
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_d4lt(const Tensor& t) {
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    out.reserve(8 + 4 * t.rank() + 8 * t.size());
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto extent : t.shape()) put_u32(out, static_cast<std::uint32_t>(extent));
    for (double v : t.data()) put_f64(out, v);
    return out;
}

Tensor decode_d4lt(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw IoError("D4LT: bad magic");
    Reader in(bytes);
    in.take(4);
    const auto rank = static_cast<std::size_t>(in.take(4));
    if (rank == 0 || rank > Tensor::kMaxRank) throw IoError("D4LT: unsupported rank " + std::to_string(rank));
    Tensor::Shape shape(rank);
    for (auto& extent : shape) extent = static_cast<std::size_t>(in.take(4));
    validate_shape(shape);
    const std::size_t count = shape_volume(shape);
    if (in.remaining() != 8 * count) throw IoError("D4LT: payload size does not match shape");
    std::vector<double> data(count);
    for (auto& v : data) v = std::bit_cast<double>(in.take(8));
    return Tensor(std::move(shape), std::move(data));
}

void write_d4lt(const std::filesystem::path& path, const Tensor& t) {
    const auto bytes = encode_d4lt(t);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

Tensor read_d4lt(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_d4lt(bytes);
}

}  // namespace latentedit
