#include "sparsedrop/block_mask.hpp"

#include <bit>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sparsedrop/rng.hpp"

namespace sparsedrop {
namespace {

std::size_t word_count(std::int64_t bits) {
    return static_cast<std::size_t>((bits + 63) / 64);
}

void check_geometry(int block_rows, int block_cols, int m_blk, int k_blk) {
    if (block_rows <= 0 || block_cols <= 0 || m_blk <= 0 || k_blk <= 0)
        throw std::invalid_argument("BlockMask geometry must be positive: grid " +
                                    std::to_string(block_rows) + "x" + std::to_string(block_cols) +
                                    ", blocks " + std::to_string(m_blk) + "x" +
                                    std::to_string(k_blk));
}

std::int64_t popcount_words(const std::vector<std::uint64_t>& words) {
    std::int64_t n = 0;
    for (std::uint64_t w : words) n += std::popcount(w);
    return n;
}

}  // namespace

BlockMask::BlockMask(int block_rows, int block_cols, int m_blk, int k_blk)
    : block_rows_(block_rows), block_cols_(block_cols), m_blk_(m_blk), k_blk_(k_blk) {
    check_geometry(block_rows, block_cols, m_blk, k_blk);
    words_.assign(word_count(total_blocks()), 0);
}

void BlockMask::set(int block_row, int block_col, bool keep) {
    const std::uint64_t b = static_cast<std::uint64_t>(block_row) * block_cols_ + block_col;
    const std::uint64_t bit = std::uint64_t(1) << (b & 63);
    const bool was = words_[b >> 6] & bit;
    if (keep && !was) {
        words_[b >> 6] |= bit;
        ++keep_count_;
    } else if (!keep && was) {
        words_[b >> 6] &= ~bit;
        --keep_count_;
    }
}

BlockMask sample_mask(const DropoutSpec& spec, int rows, int cols) {
    if (spec.p < 0.0 || spec.p >= 1.0)
        throw std::invalid_argument("dropout rate must lie in [0, 1), got " +
                                    std::to_string(spec.p));
    if (spec.m_blk <= 0 || rows % spec.m_blk != 0)
        throw std::invalid_argument("mask block size m_blk=" + std::to_string(spec.m_blk) +
                                    " does not divide rows=" + std::to_string(rows));
    if (spec.k_blk <= 0 || cols % spec.k_blk != 0)
        throw std::invalid_argument("mask block size k_blk=" + std::to_string(spec.k_blk) +
                                    " does not divide cols=" + std::to_string(cols));

    BlockMask mask(rows / spec.m_blk, cols / spec.k_blk, spec.m_blk, spec.k_blk);
    const int bc = mask.block_cols_;
    std::uint64_t word = 0;
    std::size_t wi = 0;
    for (std::int64_t b = 0; b < mask.total_blocks(); ++b) {
        const int r = static_cast<int>(b / bc);
        const int c = static_cast<int>(b % bc);
        const bool keep = unit_interval(counter_hash(spec.seed, r, c)) >= spec.p;
        word |= std::uint64_t(keep) << (b & 63);
        if ((b & 63) == 63) {
            mask.words_[wi++] = word;
            word = 0;
        }
    }
    if (mask.total_blocks() & 63) mask.words_[wi] = word;
    mask.keep_count_ = popcount_words(mask.words_);
    return mask;
}

BlockMask mask_from_words(int block_rows, int block_cols, int m_blk, int k_blk,
                          std::vector<std::uint64_t> words) {
    check_geometry(block_rows, block_cols, m_blk, k_blk);
    const std::int64_t bits = static_cast<std::int64_t>(block_rows) * block_cols;
    if (words.size() != word_count(bits))
        throw std::invalid_argument("BlockMask word count " + std::to_string(words.size()) +
                                    " does not match grid of " + std::to_string(bits) + " bits");
    if (bits & 63) {
        const std::uint64_t padding = ~std::uint64_t(0) << (bits & 63);
        if (words.back() & padding)
            throw std::invalid_argument("BlockMask has nonzero bits past the block grid");
    }
    BlockMask mask(block_rows, block_cols, m_blk, k_blk);
    mask.words_ = std::move(words);
    mask.keep_count_ = popcount_words(mask.words_);
    return mask;
}

BlockMask retile(const BlockMask& mask, int split_m, int split_k) {
    if (split_m <= 0 || mask.m_blk() % split_m != 0)
        throw std::invalid_argument("split_m=" + std::to_string(split_m) +
                                    " does not divide m_blk=" + std::to_string(mask.m_blk()));
    if (split_k <= 0 || mask.k_blk() % split_k != 0)
        throw std::invalid_argument("split_k=" + std::to_string(split_k) +
                                    " does not divide k_blk=" + std::to_string(mask.k_blk()));
    if (split_m == 1 && split_k == 1) return mask;

    BlockMask out(mask.block_rows() * split_m, mask.block_cols() * split_k,
                  mask.m_blk() / split_m, mask.k_blk() / split_k);
    for (int r = 0; r < out.block_rows(); ++r)
        for (int c = 0; c < out.block_cols(); ++c)
            out.set(r, c, mask.kept(r / split_m, c / split_k));
    return out;
}

BlockMask transpose_mask(const BlockMask& mask) {
    BlockMask out(mask.block_cols(), mask.block_rows(), mask.k_blk(), mask.m_blk());
    for (int r = 0; r < mask.block_rows(); ++r)
        for (int c = 0; c < mask.block_cols(); ++c)
            out.set(c, r, mask.kept(r, c));
    return out;
}

std::vector<int> kept_blocks_in_row(const BlockMask& mask, int block_row) {
    if (block_row < 0 || block_row >= mask.block_rows())
        throw std::out_of_range("block row " + std::to_string(block_row) +
                                " outside grid with " + std::to_string(mask.block_rows()) +
                                " rows");
    std::vector<int> kept;
    kept.reserve(mask.block_cols());
    for (int c = 0; c < mask.block_cols(); ++c)
        if (mask.kept(block_row, c)) kept.push_back(c);
    return kept;
}

namespace {

constexpr char kMagic[4] = {'B', 'M', 'S', 'K'};
constexpr unsigned char kVersion = 0x01;

void put_u32_le(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64_le(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32_le(std::istream& in, const std::string& name) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error(name + ": truncated BMSK header");
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
           std::uint32_t(b[3]) << 24;
}

std::uint64_t get_u64_le(std::istream& in, const std::string& name) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8))
        throw std::runtime_error(name + ": truncated BMSK payload");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
}

}  // namespace

void write_mask(const BlockMask& mask, std::ostream& out) {
    out.write(kMagic, 4);
    out.put(static_cast<char>(kVersion));
    put_u32_le(out, static_cast<std::uint32_t>(mask.block_rows()));
    put_u32_le(out, static_cast<std::uint32_t>(mask.block_cols()));
    put_u32_le(out, static_cast<std::uint32_t>(mask.m_blk()));
    put_u32_le(out, static_cast<std::uint32_t>(mask.k_blk()));
    for (std::uint64_t w : mask.words()) put_u64_le(out, w);
}

BlockMask read_mask(std::istream& in, const std::string& name) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error(name + ": not a BMSK file (bad magic)");
    const int version = in.get();
    if (version != kVersion)
        throw std::runtime_error(name + ": unsupported BMSK version " + std::to_string(version));
    const auto block_rows = static_cast<int>(get_u32_le(in, name));
    const auto block_cols = static_cast<int>(get_u32_le(in, name));
    const auto m_blk = static_cast<int>(get_u32_le(in, name));
    const auto k_blk = static_cast<int>(get_u32_le(in, name));
    if (block_rows <= 0 || block_cols <= 0 || m_blk <= 0 || k_blk <= 0)
        throw std::runtime_error(name + ": BMSK header has non-positive geometry");
    const std::size_t n_words =
        word_count(static_cast<std::int64_t>(block_rows) * block_cols);
    std::vector<std::uint64_t> words(n_words);
    for (std::size_t i = 0; i < n_words; ++i) words[i] = get_u64_le(in, name);
    try {
        return mask_from_words(block_rows, block_cols, m_blk, k_blk, std::move(words));
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(name + ": " + e.what());
    }
}

void save_mask(const BlockMask& mask, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    write_mask(mask, out);
    if (!out) throw std::runtime_error("write failed: " + path);
}

BlockMask load_mask(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_mask(in, path);
}

}  // namespace sparsedrop
