#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "oracles.hpp"
#include "sparsedrop/block_mask.hpp"

using namespace sparsedrop;

namespace {

DropoutSpec spec_of(double p, int m_blk, int k_blk, std::uint64_t seed) {
    DropoutSpec s;
    s.p = p;
    s.m_blk = m_blk;
    s.k_blk = k_blk;
    s.seed = seed;
    return s;
}

}  // namespace

TEST_CASE("sample_mask p=0 keeps everything") {
    auto m = sample_mask(spec_of(0.0, 4, 4, 123), 16, 32);
    CHECK(m.block_rows() == 4);
    CHECK(m.block_cols() == 8);
    CHECK(m.keep_count() == 32);
    CHECK(m.realized_sparsity() == 0.0);
}

TEST_CASE("sample_mask is deterministic") {
    auto spec = spec_of(0.4, 2, 2, 99);
    auto a = sample_mask(spec, 64, 64);
    auto b = sample_mask(spec, 64, 64);
    CHECK(a.words() == b.words());
    CHECK(a.keep_count() == b.keep_count());
}

TEST_CASE("sample_mask validates arguments") {
    CHECK_THROWS_WITH_AS(sample_mask(spec_of(0.5, 3, 4, 0), 16, 16),
                         doctest::Contains("m_blk"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(sample_mask(spec_of(0.5, 4, 5, 0), 16, 16),
                         doctest::Contains("k_blk"), std::invalid_argument);
    CHECK_THROWS_AS(sample_mask(spec_of(1.0, 4, 4, 0), 16, 16), std::invalid_argument);
    CHECK_THROWS_AS(sample_mask(spec_of(-0.1, 4, 4, 0), 16, 16), std::invalid_argument);
}

TEST_CASE("sample_mask keep fraction is unbiased over many seeds") {
    // 32x32 grid, p = 0.5, 1000 seeds: mean keep fraction within 3 binomial
    // standard deviations.
    const double p = 0.5;
    const int n_seeds = 1000;
    std::int64_t kept = 0, total = 0;
    for (int s = 0; s < n_seeds; ++s) {
        auto m = sample_mask(spec_of(p, 1, 1, s), 32, 32);
        kept += m.keep_count();
        total += m.total_blocks();
    }
    const double mean_keep = double(kept) / double(total);
    const double sigma = std::sqrt(p * (1 - p) / double(total));
    CHECK(std::abs(mean_keep - (1 - p)) < 3 * sigma);
}

TEST_CASE("expand: all-set and single-block layouts") {
    auto all = sample_mask(spec_of(0.0, 2, 2, 0), 4, 4);
    auto ex = expand<float>(all);
    CHECK(same_bits(ex, Matrix<float>::full(4, 4, 1.0f)));

    BlockMask single(2, 2, 2, 2);
    single.set(0, 0, true);
    auto e = expand<float>(single);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(e(i, j) == ((i < 2 && j < 2) ? 1.0f : 0.0f));
}

TEST_CASE("expand agrees with the per-bit query on random masks") {
    auto m = sample_mask(spec_of(0.35, 3, 2, 77), 12, 10);
    auto e = expand<double>(m);
    for (int i = 0; i < e.rows(); ++i)
        for (int j = 0; j < e.cols(); ++j)
            CHECK(e(i, j) == (m.kept(i / 3, j / 2) ? 1.0 : 0.0));
}

TEST_CASE("retile with unit splits is the identity") {
    auto m = sample_mask(spec_of(0.5, 4, 4, 5), 32, 32);
    auto r = retile(m, 1, 1);
    CHECK(r == m);
}

TEST_CASE("retile replicates each bit") {
    // 2x2 logical blocks split along M only: every parent bit appears twice,
    // stacked vertically, on 1x2... i.e. new grid is (2*rows, cols).
    auto m = sample_mask(spec_of(0.5, 2, 2, 6), 8, 8);
    auto r = retile(m, 2, 1);
    CHECK(r.m_blk() == 1);
    CHECK(r.k_blk() == 2);
    CHECK(r.block_rows() == 2 * m.block_rows());
    CHECK(r.block_cols() == m.block_cols());
    for (int br = 0; br < r.block_rows(); ++br)
        for (int bc = 0; bc < r.block_cols(); ++bc)
            CHECK(r.kept(br, bc) == m.kept(br / 2, bc));
    CHECK(r.keep_count() == 2 * m.keep_count());
}

TEST_CASE("retile preserves the expanded mask for random splits") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        auto m = sample_mask(spec_of(0.4, 4, 8, seed), 16, 32);
        for (int sm : {1, 2, 4})
            for (int sk : {1, 2, 4, 8}) {
                auto r = retile(m, sm, sk);
                CHECK(same_bits(expand<float>(r), expand<float>(m)));
            }
    }
}

TEST_CASE("retile rejects non-dividing splits") {
    auto m = sample_mask(spec_of(0.5, 4, 4, 0), 16, 16);
    CHECK_THROWS_AS(retile(m, 3, 1), std::invalid_argument);
    CHECK_THROWS_AS(retile(m, 1, 5), std::invalid_argument);
}

TEST_CASE("transpose_mask basics") {
    BlockMask m(2, 3, 4, 8);
    m.set(0, 1, true);
    auto t = transpose_mask(m);
    CHECK(t.block_rows() == 3);
    CHECK(t.block_cols() == 2);
    CHECK(t.m_blk() == 8);
    CHECK(t.k_blk() == 4);
    CHECK(t.kept(1, 0));
    CHECK(t.keep_count() == 1);
}

TEST_CASE("transpose_mask is an involution and commutes with expand") {
    auto m = sample_mask(spec_of(0.45, 2, 4, 13), 12, 32);
    CHECK(transpose_mask(transpose_mask(m)) == m);
    CHECK(same_bits(expand<float>(transpose_mask(m)), transpose(expand<float>(m))));
}

TEST_CASE("symmetric mask is fixed by transpose_mask") {
    BlockMask m(3, 3, 2, 2);
    m.set(0, 0, true);
    m.set(1, 2, true);
    m.set(2, 1, true);
    m.set(1, 1, true);
    CHECK(transpose_mask(m) == m);
}

TEST_CASE("kept_blocks_in_row") {
    auto all = sample_mask(spec_of(0.0, 2, 2, 0), 8, 12);
    CHECK(kept_blocks_in_row(all, 2) == std::vector<int>{0, 1, 2, 3, 4, 5});

    BlockMask empty_row(2, 4, 1, 1);
    empty_row.set(1, 3, true);
    CHECK(kept_blocks_in_row(empty_row, 0).empty());
    CHECK(kept_blocks_in_row(empty_row, 1) == std::vector<int>{3});

    CHECK_THROWS_AS(kept_blocks_in_row(all, 4), std::out_of_range);

    auto m = sample_mask(spec_of(0.5, 2, 2, 31), 20, 20);
    for (int r = 0; r < m.block_rows(); ++r) {
        std::vector<int> expected;
        for (int c = 0; c < m.block_cols(); ++c)
            if (m.kept(r, c)) expected.push_back(c);
        CHECK(kept_blocks_in_row(m, r) == expected);
    }
}

TEST_CASE("mask can be reconstructed from its expansion") {
    auto m = sample_mask(spec_of(0.5, 4, 2, 17), 16, 10);
    auto e = expand<float>(m);
    BlockMask rebuilt(m.block_rows(), m.block_cols(), m.m_blk(), m.k_blk());
    for (int r = 0; r < m.block_rows(); ++r)
        for (int c = 0; c < m.block_cols(); ++c)
            rebuilt.set(r, c, e(r * m.m_blk(), c * m.k_blk()) != 0.0f);
    CHECK(rebuilt == m);
    CHECK(rebuilt.words() == m.words());
}

TEST_CASE("keep_count matches a per-bit scan") {
    auto m = sample_mask(spec_of(0.3, 2, 2, 40), 30, 30);
    CHECK(m.keep_count() == testing::scan_keep_count(m));
}

TEST_CASE("BMSK roundtrip is bit-exact") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto m = sample_mask(spec_of(0.4, 2, 3, seed), 2 * (1 + int(seed % 7)), 3 * (1 + int(seed % 5)));
        std::stringstream buf;
        write_mask(m, buf);
        auto back = read_mask(buf, "buffer");
        CHECK(back == m);
    }
}

TEST_CASE("BMSK layout: magic, version, little-endian header") {
    BlockMask m(1, 2, 3, 4);
    m.set(0, 1, true);
    std::stringstream buf;
    write_mask(m, buf);
    const std::string bytes = buf.str();
    REQUIRE(bytes.size() == 4 + 1 + 16 + 8);
    CHECK(bytes.substr(0, 4) == "BMSK");
    CHECK(bytes[4] == 0x01);
    CHECK(static_cast<unsigned char>(bytes[5]) == 1);   // block_rows LE
    CHECK(static_cast<unsigned char>(bytes[9]) == 2);   // block_cols LE
    CHECK(static_cast<unsigned char>(bytes[13]) == 3);  // m_blk LE
    CHECK(static_cast<unsigned char>(bytes[17]) == 4);  // k_blk LE
    CHECK(static_cast<unsigned char>(bytes[21]) == 2);  // word 0: bit 1 set
}

TEST_CASE("BMSK reader rejects malformed input") {
    std::stringstream bad_magic("XMSK rest");
    CHECK_THROWS_WITH_AS(read_mask(bad_magic, "bad"), doctest::Contains("magic"),
                         std::runtime_error);

    BlockMask m(2, 2, 1, 1);
    std::stringstream buf;
    write_mask(m, buf);
    std::string bytes = buf.str();
    bytes[4] = 0x02;  // unsupported version
    std::stringstream versioned(bytes);
    CHECK_THROWS_WITH_AS(read_mask(versioned, "v2"), doctest::Contains("version"),
                         std::runtime_error);

    std::stringstream truncated(bytes.substr(0, 12));
    truncated.str(bytes.substr(0, 12));
    CHECK_THROWS_AS(read_mask(truncated, "short"), std::runtime_error);
}

TEST_CASE("BMSK file save/load") {
    namespace fs = std::filesystem;
    const auto path = fs::temp_directory_path() / "sparsedrop_mask_test.bmsk";
    auto m = sample_mask(spec_of(0.25, 8, 8, 321), 64, 128);
    save_mask(m, path.string());
    auto back = load_mask(path.string());
    CHECK(back == m);
    fs::remove(path);
    CHECK_THROWS_AS(load_mask((fs::temp_directory_path() / "missing.bmsk").string()),
                    std::runtime_error);
}

TEST_CASE("mask_from_words rejects nonzero padding bits") {
    std::vector<std::uint64_t> words{~std::uint64_t(0)};
    CHECK_THROWS_AS(mask_from_words(3, 3, 1, 1, words), std::invalid_argument);
    std::vector<std::uint64_t> ok{(std::uint64_t(1) << 9) - 1};
    auto m = mask_from_words(3, 3, 1, 1, ok);
    CHECK(m.keep_count() == 9);
}
