// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace latentedit {

/// Dense row-major array of doubles with rank 1..4.
///
/// Holds every latent-space quantity (x_t, x_0, noise, model outputs) as well
/// as the 2-D matrices used by the attention kernels. Arithmetic is strictly
/// shape-matched; the only broadcast is scalar multiplication.
class Tensor {
public:
    using Shape = std::vector<std::size_t>;
    static constexpr std::size_t kMaxRank = 4;

    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor identity(std::size_t n);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t axis) const;
    bool empty() const { return data_.empty(); }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // 2-D element access.
    double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    // Rows of a 2-D tensor, or the leading-axis slice of higher ranks.
    std::span<double> row(std::size_t r);
    std::span<const double> row(std::size_t r) const;

    Tensor reshaped(Shape shape) const;
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    Tensor& operator+=(const Tensor& other);
    Tensor& operator-=(const Tensor& other);
    Tensor& operator*=(double s);

    // Bitwise-style equality: same shape and element-wise ==.
    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

void validate_shape(const Tensor::Shape& shape);
std::size_t shape_volume(const Tensor::Shape& shape);
std::string shape_string(const Tensor::Shape& shape);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& a);

/// a*x + b*y, computed element-wise in exactly that order.
Tensor lincomb(double a, const Tensor& x, double b, const Tensor& y);

double dot(const Tensor& a, const Tensor& b);
double norm2(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);
double mean(const Tensor& a);
bool all_finite(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);
// a * b^T without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// Row-wise softmax of scale*a, max-subtracted per row.
Tensor softmax_rows(const Tensor& a, double scale = 1.0);

/// Per-row layer normalization without affine parameters.
Tensor layer_norm_rows(const Tensor& a, double eps = 1e-6);

}  // namespace latentedit
