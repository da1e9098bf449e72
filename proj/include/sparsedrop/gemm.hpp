#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "sparsedrop/block_mask.hpp"
#include "sparsedrop/matrix.hpp"

namespace sparsedrop {

// Accumulation-order contract, shared by every kernel in this header:
//   * output tiles are visited row-major (tile row I outer, tile col J inner);
//   * K-blocks accumulate in increasing block index;
//   * inside one block the loops run i -> k -> j with c[i,j] += a[i,k]*b[k,j];
//   * scaling is one multiply per output element after accumulation finishes.
// Every per-block contribution funnels through tile_accumulate below, so a
// sparse kernel that skips a block computes bit-for-bit what the dense kernel
// computes on zeroed input. The equality tests depend on this; do not fork
// the inner loop per kernel.

struct GemmProblem {
    int m = 0;
    int n = 0;
    int k = 0;
    TileConfig tiles;
};

// Executed-work instrumentation. kblock_per_tile_row[I] counts the K-block
// iterations spent on output tile row I; for dsd this must equal
// kept_in_row(I) * N/n_blk, for sdd kept_in_row(I) * K/k_blk.
struct KernelCounters {
    std::uint64_t kblock_iterations = 0;
    std::vector<std::uint64_t> kblock_per_tile_row;
};

template <typename T>
inline void tile_accumulate(T* __restrict acc, const T* __restrict a, int lda,
                            const T* __restrict b, int ldb, int m_blk, int n_blk, int k_blk) {
    for (int i = 0; i < m_blk; ++i) {
        const T* __restrict a_row = a + static_cast<std::size_t>(i) * lda;
        T* __restrict acc_row = acc + static_cast<std::size_t>(i) * n_blk;
        for (int k = 0; k < k_blk; ++k) {
            const T a_ik = a_row[k];
            const T* __restrict b_row = b + static_cast<std::size_t>(k) * ldb;
            for (int j = 0; j < n_blk; ++j) acc_row[j] += a_ik * b_row[j];
        }
    }
}

namespace detail {

inline void check_divides(int block, int extent, const char* which) {
    if (block <= 0 || extent % block != 0)
        throw std::invalid_argument(std::string("tile size ") + which + "=" +
                                    std::to_string(block) + " does not divide dimension " +
                                    std::to_string(extent));
}

template <typename T>
void check_gemm_shapes(const Matrix<T>& a, const Matrix<T>& b, const TileConfig& tiles) {
    if (a.cols() != b.rows())
        throw std::invalid_argument("gemm shape mismatch: " + a.shape_string() + " * " +
                                    b.shape_string());
    check_divides(tiles.m_blk, a.rows(), "m_blk");
    check_divides(tiles.n_blk, b.cols(), "n_blk");
    check_divides(tiles.k_blk, a.cols(), "k_blk");
}

inline void check_mask_geometry(const BlockMask& mask, int grid_rows, int grid_cols,
                                int blk_rows, int blk_cols, const char* where) {
    if (mask.block_rows() != grid_rows || mask.block_cols() != grid_cols ||
        mask.m_blk() != blk_rows || mask.k_blk() != blk_cols)
        throw std::invalid_argument(
            std::string(where) + ": mask geometry (" + std::to_string(mask.block_rows()) + "x" +
            std::to_string(mask.block_cols()) + " blocks of " + std::to_string(mask.m_blk()) +
            "x" + std::to_string(mask.k_blk()) + ") does not match problem (" +
            std::to_string(grid_rows) + "x" + std::to_string(grid_cols) + " blocks of " +
            std::to_string(blk_rows) + "x" + std::to_string(blk_cols) + ")");
}

// Runs fn(tile_row) over [0, tile_rows), optionally on several threads.
// Tile rows touch disjoint output rows, so any schedule gives identical bits.
template <typename Fn>
void for_each_tile_row(int tile_rows, int threads, Fn&& fn) {
    if (threads <= 1 || tile_rows <= 1) {
        for (int i = 0; i < tile_rows; ++i) fn(i);
        return;
    }
    const int n_workers = std::min(threads, tile_rows);
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int t = 0; t < n_workers; ++t)
        pool.emplace_back([&, t] {
            for (int i = t; i < tile_rows; i += n_workers) fn(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace detail

// Tiled dense GEMM: c = a * b.
template <typename T>
Matrix<T> dense_gemm(const Matrix<T>& a, const Matrix<T>& b, const TileConfig& tiles,
                     int threads = 1) {
    detail::check_gemm_shapes(a, b, tiles);
    const int m = a.rows(), n = b.cols(), k = a.cols();
    Matrix<T> c(m, n);
    detail::for_each_tile_row(m / tiles.m_blk, threads, [&](int ti) {
        std::vector<T> acc(static_cast<std::size_t>(tiles.m_blk) * tiles.n_blk);
        for (int tj = 0; tj < n / tiles.n_blk; ++tj) {
            std::fill(acc.begin(), acc.end(), T(0));
            for (int tk = 0; tk < k / tiles.k_blk; ++tk)
                tile_accumulate(acc.data(), a.data() + static_cast<std::size_t>(ti) * tiles.m_blk * k + static_cast<std::size_t>(tk) * tiles.k_blk,
                                k, b.data() + static_cast<std::size_t>(tk) * tiles.k_blk * n + static_cast<std::size_t>(tj) * tiles.n_blk,
                                n, tiles.m_blk, tiles.n_blk, tiles.k_blk);
            for (int i = 0; i < tiles.m_blk; ++i) {
                T* c_row = c.data() + static_cast<std::size_t>(ti * tiles.m_blk + i) * n +
                           static_cast<std::size_t>(tj) * tiles.n_blk;
                const T* acc_row = acc.data() + static_cast<std::size_t>(i) * tiles.n_blk;
                for (int j = 0; j < tiles.n_blk; ++j) c_row[j] = acc_row[j];
            }
        }
    });
    return c;
}

// Sparse-input x dense -> dense: scale_factor * (a (.) expand(mask)) * b,
// where dropped K-blocks of `a` are never read. The mask lives on `a`:
// grid (M/m_blk, K/k_blk), block extents (m_blk, k_blk).
template <typename T>
Matrix<T> dsd_matmul(const Matrix<T>& a, const BlockMask& mask, const Matrix<T>& b,
                     T scale_factor, const TileConfig& tiles, KernelCounters* counters = nullptr,
                     int threads = 1) {
    detail::check_gemm_shapes(a, b, tiles);
    const int m = a.rows(), n = b.cols(), k = a.cols();
    detail::check_mask_geometry(mask, m / tiles.m_blk, k / tiles.k_blk, tiles.m_blk, tiles.k_blk,
                                "dsd_matmul");
    Matrix<T> c(m, n);
    if (counters) {
        counters->kblock_iterations = 0;
        counters->kblock_per_tile_row.assign(m / tiles.m_blk, 0);
    }
    detail::for_each_tile_row(m / tiles.m_blk, threads, [&](int ti) {
        std::vector<T> acc(static_cast<std::size_t>(tiles.m_blk) * tiles.n_blk);
        std::uint64_t row_iters = 0;
        for (int tj = 0; tj < n / tiles.n_blk; ++tj) {
            std::fill(acc.begin(), acc.end(), T(0));
            for (int tk = 0; tk < k / tiles.k_blk; ++tk) {
                if (!mask.kept(ti, tk)) continue;
                tile_accumulate(acc.data(), a.data() + static_cast<std::size_t>(ti) * tiles.m_blk * k + static_cast<std::size_t>(tk) * tiles.k_blk,
                                k, b.data() + static_cast<std::size_t>(tk) * tiles.k_blk * n + static_cast<std::size_t>(tj) * tiles.n_blk,
                                n, tiles.m_blk, tiles.n_blk, tiles.k_blk);
                ++row_iters;
            }
            for (int i = 0; i < tiles.m_blk; ++i) {
                T* c_row = c.data() + static_cast<std::size_t>(ti * tiles.m_blk + i) * n +
                           static_cast<std::size_t>(tj) * tiles.n_blk;
                const T* acc_row = acc.data() + static_cast<std::size_t>(i) * tiles.n_blk;
                for (int j = 0; j < tiles.n_blk; ++j) c_row[j] = scale_factor * acc_row[j];
            }
        }
        if (counters) counters->kblock_per_tile_row[ti] = row_iters;
    });
    if (counters)
        for (std::uint64_t v : counters->kblock_per_tile_row) counters->kblock_iterations += v;
    return c;
}

// Dense x dense -> sparse output: scale_factor * (a * b) restricted to kept
// output blocks; dropped output tiles stay exactly zero and are never
// computed. The mask lives on the output: grid (M/m_blk, N/n_blk), block
// extents (m_blk, n_blk).
template <typename T>
Matrix<T> sdd_matmul(const Matrix<T>& a, const Matrix<T>& b, const BlockMask& mask,
                     T scale_factor, const TileConfig& tiles, KernelCounters* counters = nullptr,
                     int threads = 1) {
    detail::check_gemm_shapes(a, b, tiles);
    const int m = a.rows(), n = b.cols(), k = a.cols();
    detail::check_mask_geometry(mask, m / tiles.m_blk, n / tiles.n_blk, tiles.m_blk, tiles.n_blk,
                                "sdd_matmul");
    Matrix<T> c(m, n);
    if (counters) {
        counters->kblock_iterations = 0;
        counters->kblock_per_tile_row.assign(m / tiles.m_blk, 0);
    }
    detail::for_each_tile_row(m / tiles.m_blk, threads, [&](int ti) {
        std::vector<T> acc(static_cast<std::size_t>(tiles.m_blk) * tiles.n_blk);
        std::uint64_t row_iters = 0;
        for (int tj = 0; tj < n / tiles.n_blk; ++tj) {
            if (!mask.kept(ti, tj)) continue;
            std::fill(acc.begin(), acc.end(), T(0));
            for (int tk = 0; tk < k / tiles.k_blk; ++tk) {
                tile_accumulate(acc.data(), a.data() + static_cast<std::size_t>(ti) * tiles.m_blk * k + static_cast<std::size_t>(tk) * tiles.k_blk,
                                k, b.data() + static_cast<std::size_t>(tk) * tiles.k_blk * n + static_cast<std::size_t>(tj) * tiles.n_blk,
                                n, tiles.m_blk, tiles.n_blk, tiles.k_blk);
                ++row_iters;
            }
            for (int i = 0; i < tiles.m_blk; ++i) {
                T* c_row = c.data() + static_cast<std::size_t>(ti * tiles.m_blk + i) * n +
                           static_cast<std::size_t>(tj) * tiles.n_blk;
                const T* acc_row = acc.data() + static_cast<std::size_t>(i) * tiles.n_blk;
                for (int j = 0; j < tiles.n_blk; ++j) c_row[j] = scale_factor * acc_row[j];
            }
        }
        if (counters) counters->kblock_per_tile_row[ti] = row_iters;
    });
    if (counters)
        for (std::uint64_t v : counters->kblock_per_tile_row) counters->kblock_iterations += v;
    return c;
}

enum class SparseKind { dsd, sdd };

inline std::uint64_t flops_dense(std::int64_t m, std::int64_t n, std::int64_t k) {
    return static_cast<std::uint64_t>(2) * m * n * k;
}

// Multiply-add work actually executed by a sparse kernel on this mask.
inline std::uint64_t flops_effective(const GemmProblem& problem, const BlockMask& mask,
                                     SparseKind kind) {
    const auto keep = static_cast<std::uint64_t>(mask.keep_count());
    if (kind == SparseKind::dsd)
        return 2ull * problem.n * problem.tiles.m_blk * problem.tiles.k_blk * keep;
    return 2ull * problem.k * problem.tiles.m_blk * problem.tiles.n_blk * keep;
}

}  // namespace sparsedrop
