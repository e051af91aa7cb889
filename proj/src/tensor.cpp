// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "latentedit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "latentedit/errors.hpp"

namespace latentedit {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw InvalidShape(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                           shape_string(b.shape()));
    }
}

void require_matrix(const Tensor& a, const char* op) {
    if (a.rank() != 2) {
        throw InvalidShape(std::string(op) + ": expected a 2-D tensor, got " + shape_string(a.shape()));
    }
}

}  // namespace

void validate_shape(const Tensor::Shape& shape) {
    if (shape.empty() || shape.size() > Tensor::kMaxRank) {
        throw InvalidShape("tensor rank must be 1.." + std::to_string(Tensor::kMaxRank) + ", got " +
                           std::to_string(shape.size()));
    }
    for (auto extent : shape) {
        if (extent == 0) throw InvalidShape("zero extent in shape " + shape_string(shape));
    }
}

std::size_t shape_volume(const Tensor::Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Tensor::Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(shape_volume(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape(shape_);
    if (data_.size() != shape_volume(shape_)) {
        throw InvalidShape("data length " + std::to_string(data_.size()) + " does not match shape " +
                           shape_string(shape_));
    }
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t n_rows = rows.size();
    const std::size_t n_cols = n_rows ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(n_rows * n_cols);
    for (const auto& r : rows) {
        if (r.size() != n_cols) throw InvalidShape("ragged matrix literal");
        data.insert(data.end(), r.begin(), r.end());
    }
    return Tensor({n_rows, n_cols}, std::move(data));
}

Tensor Tensor::identity(std::size_t n) {
    Tensor out({n, n});
    for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
    return out;
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) throw InvalidShape("axis out of range");
    return shape_[axis];
}

std::span<double> Tensor::row(std::size_t r) {
    const std::size_t stride = data_.size() / shape_[0];
    return std::span<double>(data_).subspan(r * stride, stride);
}

std::span<const double> Tensor::row(std::size_t r) const {
    const std::size_t stride = data_.size() / shape_[0];
    return std::span<const double>(data_).subspan(r * stride, stride);
}

Tensor Tensor::reshaped(Shape shape) const {
    validate_shape(shape);
    if (shape_volume(shape) != data_.size()) {
        throw InvalidShape("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    return Tensor(std::move(shape), data_);
}

Tensor& Tensor::operator+=(const Tensor& other) {
    require_same_shape(*this, other, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
    require_same_shape(*this, other, "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Tensor& Tensor::operator*=(double s) {
    for (auto& v : data_) v *= s;
    return *this;
}

Tensor operator+(const Tensor& a, const Tensor& b) {
    Tensor out = a;
    out += b;
    return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
    Tensor out = a;
    out -= b;
    return out;
}

Tensor operator*(double s, const Tensor& a) {
    Tensor out = a;
    out *= s;
    return out;
}

Tensor lincomb(double a, const Tensor& x, double b, const Tensor& y) {
    require_same_shape(x, y, "lincomb");
    Tensor out(x.shape());
    auto o = out.data();
    auto xs = x.data();
    auto ys = y.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = a * xs[i] + b * ys[i];
    return out;
}

double dot(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm2(const Tensor& a) {
    // Scaled accumulation keeps tiny residuals (fixed-point tolerances near
    // 1e-10) from underflowing in the squares.
    double scale = 0.0;
    for (double v : a.data()) {
        if (std::isnan(v)) return v;
        scale = std::max(scale, std::abs(v));
    }
    if (scale == 0.0 || !std::isfinite(scale)) return scale;
    double acc = 0.0;
    for (double v : a.data()) {
        const double s = v / scale;
        acc += s * s;
    }
    return scale * std::sqrt(acc);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = std::abs(a[i] - b[i]);
        if (std::isnan(d)) return d;
        m = std::max(m, d);
    }
    return m;
}

double mean(const Tensor& a) {
    if (a.empty()) return 0.0;
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    return acc / static_cast<double>(a.size());
}

bool all_finite(const Tensor& a) {
    return std::all_of(a.data().begin(), a.data().end(), [](double v) { return std::isfinite(v); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
    if (b.dim(0) != k) {
        throw InvalidShape("matmul: inner extents differ " + shape_string(a.shape()) + " * " +
                           shape_string(b.shape()));
    }
    Tensor out({n, m});
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* po = out.data().data();
    for (std::size_t i = 0; i < n; ++i) {
        double* orow = po + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = pa[i * k + p];
            const double* brow = pb + p * m;
            for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    require_matrix(a, "transpose");
    const std::size_t n = a.dim(0), m = a.dim(1);
    Tensor out({m, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out(j, i) = a(i, j);
    return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_matrix(b, "matmul_nt");
    return matmul(a, transpose(b));
}

Tensor softmax_rows(const Tensor& a, double scale) {
    require_matrix(a, "softmax_rows");
    Tensor out = a;
    for (std::size_t r = 0; r < out.dim(0); ++r) {
        auto row = out.row(r);
        double mx = row[0] * scale;
        for (double v : row) mx = std::max(mx, v * scale);
        double sum = 0.0;
        for (double& v : row) {
            v = std::exp(v * scale - mx);
            sum += v;
        }
        const double inv = 1.0 / sum;
        for (double& v : row) v *= inv;
    }
    return out;
}

Tensor layer_norm_rows(const Tensor& a, double eps) {
    require_matrix(a, "layer_norm_rows");
    Tensor out = a;
    const double width = static_cast<double>(a.dim(1));
    for (std::size_t r = 0; r < out.dim(0); ++r) {
        auto row = out.row(r);
        double mu = 0.0;
        for (double v : row) mu += v;
        mu /= width;
        double var = 0.0;
        for (double v : row) var += (v - mu) * (v - mu);
        var /= width;
        const double inv = 1.0 / std::sqrt(var + eps);
        for (double& v : row) v = (v - mu) * inv;
    }
    return out;
}

}  // namespace latentedit
