#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace clgt::diff {

// Dense row-major 2-D tensor of doubles. Scalars are 1x1, vectors 1xN or Nx1.
struct Tensor {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    Tensor(std::size_t r, std::size_t c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {}

    static Tensor scalar(double v) { return Tensor(1, 1, {v}); }
    static Tensor row(std::initializer_list<double> values) {
        return Tensor(1, values.size(), std::vector<double>(values));
    }

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::size_t size() const { return rows * cols; }
    bool same_shape(const Tensor& other) const { return rows == other.rows && cols == other.cols; }

    bool operator==(const Tensor&) const = default;
};

}  // namespace clgt::diff
