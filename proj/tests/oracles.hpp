#pragma once

// Reference implementations the kernel tests check against. Everything here
// is deliberately independent of the tiled kernels: plain scalar loops only.

#include <cmath>
#include <cstdint>

#include "sparsedrop/block_mask.hpp"
#include "sparsedrop/matrix.hpp"
#include "sparsedrop/rng.hpp"

namespace sparsedrop::testing {

// Naive triple-loop product, no tiling.
template <typename T>
Matrix<T> naive_matmul(const Matrix<T>& a, const Matrix<T>& b) {
    Matrix<T> c(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < b.cols(); ++j) {
            T sum = 0;
            for (int k = 0; k < a.cols(); ++k) sum += a(i, k) * b(k, j);
            c(i, j) = sum;
        }
    return c;
}

// Random entries with magnitude in [0.25, 1.25) and random sign. Exact zeros
// (and products that underflow to zero) cannot occur, which keeps the
// bitwise kernel-equality checks free of +0/-0 sign noise.
template <typename T>
Matrix<T> random_matrix(int rows, int cols, std::uint64_t seed) {
    Matrix<T> m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            const std::uint64_t bits = counter_hash(seed, i, j);
            const double mag = 0.25 + unit_interval(bits);
            m(i, j) = static_cast<T>((bits & 1) ? mag : -mag);
        }
    return m;
}

template <typename T>
double frobenius(const Matrix<T>& m) {
    double sum = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        const double v = m.data()[i];
        sum += v * v;
    }
    return std::sqrt(sum);
}

template <typename T>
double relative_frobenius_error(const Matrix<T>& got, const Matrix<T>& want) {
    Matrix<T> diff(got.rows(), got.cols());
    for (std::size_t i = 0; i < got.size(); ++i)
        diff.data()[i] = got.data()[i] - want.data()[i];
    const double denom = frobenius(want);
    return frobenius(diff) / (denom > 0 ? denom : 1.0);
}

// Zeroes dropped blocks by assignment (not multiplication, which would turn
// negative entries into -0.0 and break bit-for-bit comparison with a kernel
// that never writes them).
template <typename T>
Matrix<T> mask_select(const Matrix<T>& m, const BlockMask& mask) {
    Matrix<T> out = m;
    for (int br = 0; br < mask.block_rows(); ++br)
        for (int bc = 0; bc < mask.block_cols(); ++bc) {
            if (mask.kept(br, bc)) continue;
            for (int i = br * mask.m_blk(); i < (br + 1) * mask.m_blk(); ++i)
                for (int j = bc * mask.k_blk(); j < (bc + 1) * mask.k_blk(); ++j)
                    out(i, j) = T(0);
        }
    return out;
}

// Uniformly random mask with an exact number of kept blocks is not needed;
// tests sample Bernoulli masks through the library and independently re-read
// them bit by bit with this helper.
inline std::int64_t scan_keep_count(const BlockMask& mask) {
    std::int64_t n = 0;
    for (int r = 0; r < mask.block_rows(); ++r)
        for (int c = 0; c < mask.block_cols(); ++c)
            if (mask.kept(r, c)) ++n;
    return n;
}

}  // namespace sparsedrop::testing
