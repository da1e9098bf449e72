#pragma once

#include <cstddef>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace sparsedrop {

// Dense row-major matrix: element (i, j) lives at data[i * cols + j].
// Values are immutable by convention once an operation has returned them;
// all free functions below are pure and safe to call concurrently.
template <typename T>
class Matrix {
public:
    Matrix() = default;

    Matrix(int rows, int cols) : rows_(rows), cols_(cols) {
        if (rows <= 0 || cols <= 0)
            throw std::invalid_argument("Matrix dimensions must be positive, got " +
                                        shape_string(rows, cols));
        data_.resize(static_cast<std::size_t>(rows) * cols, T(0));
    }

    Matrix(int rows, int cols, std::vector<T> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (rows <= 0 || cols <= 0)
            throw std::invalid_argument("Matrix dimensions must be positive, got " +
                                        shape_string(rows, cols));
        if (data_.size() != static_cast<std::size_t>(rows) * cols)
            throw std::invalid_argument("Matrix data length " + std::to_string(data_.size()) +
                                        " does not match shape " + shape_string(rows, cols));
    }

    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = T(1);
        return m;
    }

    static Matrix full(int rows, int cols, T value) {
        Matrix m(rows, cols);
        for (auto& v : m.data_) v = value;
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    T& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
    const T& operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::size_t size() const { return data_.size(); }

    bool same_shape(const Matrix& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }

    std::string shape_string() const { return shape_string(rows_, cols_); }

    static std::string shape_string(int rows, int cols) {
        return std::to_string(rows) + "x" + std::to_string(cols);
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<T> data_;
};

// Bit-for-bit equality (distinguishes -0.0 from +0.0, as the kernel
// equivalence tests require).
template <typename T>
bool same_bits(const Matrix<T>& a, const Matrix<T>& b) {
    if (!a.same_shape(b)) return false;
    return std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

template <typename T>
Matrix<T> elementwise_mul(const Matrix<T>& a, const Matrix<T>& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("elementwise_mul shape mismatch: " + a.shape_string() +
                                    " vs " + b.shape_string());
    Matrix<T> out(a.rows(), a.cols());
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    for (std::size_t i = 0; i < a.size(); ++i) po[i] = pa[i] * pb[i];
    return out;
}

template <typename T>
Matrix<T> transpose(const Matrix<T>& a) {
    Matrix<T> out(a.cols(), a.rows());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j)
            out(j, i) = a(i, j);
    return out;
}

template <typename T>
Matrix<T> scale(const Matrix<T>& a, T s) {
    Matrix<T> out(a.rows(), a.cols());
    const T* pa = a.data();
    T* po = out.data();
    for (std::size_t i = 0; i < a.size(); ++i) po[i] = s * pa[i];
    return out;
}

}  // namespace sparsedrop
