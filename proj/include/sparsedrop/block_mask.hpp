#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sparsedrop/matrix.hpp"

namespace sparsedrop {

// GEMM block sizes, in elements. Every kernel assumes each block size divides
// the problem dimension it partitions.
struct TileConfig {
    int m_blk = 32;
    int n_blk = 32;
    int k_blk = 32;
};

// One sampled dropout configuration: rate, mask granularity, seed.
struct DropoutSpec {
    double p = 0.0;        // drop probability, in [0, 1)
    int m_blk = 32;        // mask block extent along M (rows)
    int k_blk = 32;        // mask block extent along K (cols)
    std::uint64_t seed = 0;
};

// Keep/drop grid over (rows/m_blk) x (cols/k_blk) blocks, bit-packed into
// 64-bit words. Bit b = r * block_cols + c, stored LSB-first in words[b/64];
// set means KEEP. Bits past the grid are zero. Immutable after sampling.
class BlockMask {
public:
    BlockMask() = default;

    // All-clear mask of the given geometry.
    BlockMask(int block_rows, int block_cols, int m_blk, int k_blk);

    int block_rows() const { return block_rows_; }
    int block_cols() const { return block_cols_; }
    int m_blk() const { return m_blk_; }
    int k_blk() const { return k_blk_; }
    int rows() const { return block_rows_ * m_blk_; }   // element extent
    int cols() const { return block_cols_ * k_blk_; }

    std::int64_t total_blocks() const {
        return static_cast<std::int64_t>(block_rows_) * block_cols_;
    }
    std::int64_t keep_count() const { return keep_count_; }
    double realized_sparsity() const {
        return total_blocks() == 0 ? 0.0
                                   : 1.0 - static_cast<double>(keep_count_) / total_blocks();
    }

    bool kept(int block_row, int block_col) const {
        const std::uint64_t b =
            static_cast<std::uint64_t>(block_row) * block_cols_ + block_col;
        return (words_[b >> 6] >> (b & 63)) & 1u;
    }

    void set(int block_row, int block_col, bool keep);

    const std::vector<std::uint64_t>& words() const { return words_; }

    bool operator==(const BlockMask& other) const = default;

private:
    int block_rows_ = 0;
    int block_cols_ = 0;
    int m_blk_ = 0;
    int k_blk_ = 0;
    std::int64_t keep_count_ = 0;
    std::vector<std::uint64_t> words_;

    friend BlockMask sample_mask(const DropoutSpec&, int, int);
    friend BlockMask mask_from_words(int, int, int, int, std::vector<std::uint64_t>);
};

// Bernoulli(1-p) keep decision per block. The draw for block (r, c) is a pure
// function of (spec.seed, r, c): identical inputs give identical masks under
// any evaluation schedule.
BlockMask sample_mask(const DropoutSpec& spec, int rows, int cols);

// Rebuild a mask from raw words (validates the padding-bits-are-zero
// invariant; used by the BMSK reader and tests).
BlockMask mask_from_words(int block_rows, int block_cols, int m_blk, int k_blk,
                          std::vector<std::uint64_t> words);

// Same keep pattern at block granularity (m_blk/split_m, k_blk/split_k);
// each original bit is replicated split_m x split_k times.
BlockMask retile(const BlockMask& mask, int split_m, int split_k);

// Grid and block extents swapped; bit (c, r) of the result is bit (r, c) of
// the input, so expand(transpose_mask(m)) == transpose(expand(m)).
BlockMask transpose_mask(const BlockMask& mask);

// Strictly increasing block-column indices of the kept blocks in one row.
std::vector<int> kept_blocks_in_row(const BlockMask& mask, int block_row);

// Elementwise 0/1 matrix of shape (rows(), cols()).
template <typename T>
Matrix<T> expand(const BlockMask& mask) {
    Matrix<T> out(mask.rows(), mask.cols());
    for (int br = 0; br < mask.block_rows(); ++br)
        for (int bc = 0; bc < mask.block_cols(); ++bc) {
            if (!mask.kept(br, bc)) continue;
            for (int i = br * mask.m_blk(); i < (br + 1) * mask.m_blk(); ++i)
                for (int j = bc * mask.k_blk(); j < (bc + 1) * mask.k_blk(); ++j)
                    out(i, j) = T(1);
        }
    return out;
}

// BMSK container: magic "BMSK", version 0x01, little-endian u32 block_rows,
// block_cols, m_blk, k_blk, then the words as little-endian u64. Bit-exact
// roundtrip.
void save_mask(const BlockMask& mask, const std::string& path);
BlockMask load_mask(const std::string& path);
void write_mask(const BlockMask& mask, std::ostream& out);
BlockMask read_mask(std::istream& in, const std::string& name);

}  // namespace sparsedrop
