#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

#include "rulkit/common.hpp"

namespace rulkit {

// Dense row-major tensor of doubles. Rank is whatever the shape says; the
// network only ever uses ranks 1-3.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> dims) : shape(std::move(dims)) {
        data.assign(static_cast<size_t>(element_count(shape)), 0.0);
    }
    Tensor(std::initializer_list<int> dims) : Tensor(std::vector<int>(dims)) {}
    Tensor(std::initializer_list<int> dims, std::vector<double> values)
        : shape(dims), data(std::move(values)) {
        if (static_cast<std::int64_t>(data.size()) != element_count(shape))
            throw_shape("tensor data size does not match shape");
    }

    static std::int64_t element_count(const std::vector<int>& dims) {
        std::int64_t n = 1;
        for (int d : dims) {
            if (d < 0) throw_shape("negative tensor dimension");
            n *= d;
        }
        return n;
    }

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }

    int dim(int i) const {
        if (i < 0 || i >= rank()) throw_shape("tensor dim index out of range");
        return shape[i];
    }

    double& at(int i, int j) { return data[static_cast<size_t>(i) * shape[1] + j]; }
    const double& at(int i, int j) const { return data[static_cast<size_t>(i) * shape[1] + j]; }
    double& at(int i, int j, int k) {
        return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
    }
    const double& at(int i, int j, int k) const {
        return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
    }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

// C += A * B for row-major A (m x k) and B (k x n).
void matmul_acc(const double* a, const double* b, double* c, int m, int k, int n);

// C += A^T * B for row-major A (k x m) and B (k x n); C is (m x n).
void matmul_at_b_acc(const double* a, const double* b, double* c, int m, int k, int n);

// C += A * B^T for row-major A (m x k) and B (n x k); C is (m x n).
void matmul_a_bt_acc(const double* a, const double* b, double* c, int m, int k, int n);

}  // namespace rulkit
