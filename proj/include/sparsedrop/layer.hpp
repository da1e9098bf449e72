#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>

#include "sparsedrop/block_mask.hpp"
#include "sparsedrop/gemm.hpp"
#include "sparsedrop/matrix.hpp"
#include "sparsedrop/rng.hpp"

namespace sparsedrop {

enum class LinearVariant { dense, dropout_dense, sparsedrop };

inline const char* variant_name(LinearVariant v) {
    switch (v) {
        case LinearVariant::dense: return "dense";
        case LinearVariant::dropout_dense: return "dropout_dense";
        case LinearVariant::sparsedrop: return "sparsedrop";
    }
    return "?";
}

// A bias-free linear layer y = x * weight with dropout fused on the input
// side. weight is K x N. For sparsedrop the mask block sizes must equal the
// GEMM tile sizes (m_blk, k_blk); the constructor enforces it.
template <typename T>
struct LinearLayer {
    LinearVariant kind = LinearVariant::dense;
    Matrix<T> weight;
    DropoutSpec spec;    // ignored for dense
    TileConfig tiles;
    int layer_index = 0; // mixed into the per-step mask seed

    LinearLayer() = default;
    LinearLayer(LinearVariant kind_, Matrix<T> weight_, DropoutSpec spec_, TileConfig tiles_,
                int layer_index_ = 0)
        : kind(kind_), weight(std::move(weight_)), spec(spec_), tiles(tiles_),
          layer_index(layer_index_) {
        if (kind == LinearVariant::sparsedrop &&
            (spec.m_blk != tiles.m_blk || spec.k_blk != tiles.k_blk))
            throw std::invalid_argument(
                "sparsedrop mask block sizes must equal the GEMM tile sizes");
    }
};

// Everything backward needs from the matching forward call. The same mask
// object serves the forward product and both gradients.
template <typename T>
struct LayerContext {
    Matrix<T> input;
    std::optional<BlockMask> block_mask;     // sparsedrop, training only
    std::optional<Matrix<T>> element_mask;   // dropout_dense, training only
    bool training = false;
    std::uint64_t step_seed = 0;
};

namespace detail {

// One seed per (layer instance, step); block (r, c) decisions then derive
// from it via counter_hash, so masks are reproducible under any schedule.
inline std::uint64_t effective_seed(const DropoutSpec& spec, std::uint64_t step_seed,
                                    int layer_index) {
    return counter_hash(spec.seed, step_seed, static_cast<std::uint64_t>(layer_index));
}

template <typename T>
Matrix<T> sample_element_mask(std::uint64_t seed, double p, int rows, int cols) {
    Matrix<T> m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            m(i, j) = unit_interval(counter_hash(seed, i, j)) >= p ? T(1) : T(0);
    return m;
}

template <typename T>
T dropout_scale(double p) {
    return static_cast<T>(1.0 / (1.0 - p));
}

}  // namespace detail

template <typename T>
std::pair<Matrix<T>, LayerContext<T>> forward(const LinearLayer<T>& layer, const Matrix<T>& x,
                                              bool train, std::uint64_t step_seed,
                                              int threads = 1) {
    if (x.cols() != layer.weight.rows())
        throw std::invalid_argument("layer forward: input " + x.shape_string() +
                                    " does not match weight " + layer.weight.shape_string());
    LayerContext<T> ctx;
    ctx.input = x;
    ctx.training = train;
    ctx.step_seed = step_seed;

    // Dropout is a no-op during inference: every variant computes x * W.
    if (!train || layer.kind == LinearVariant::dense)
        return {dense_gemm(x, layer.weight, layer.tiles, threads), std::move(ctx)};

    // p = 0 needs no special case: the mask comes out all-set and the scale
    // is exactly 1, so both dropout paths reduce bitwise to the dense product.
    const std::uint64_t seed = detail::effective_seed(layer.spec, step_seed, layer.layer_index);
    const T s = detail::dropout_scale<T>(layer.spec.p);
    if (layer.kind == LinearVariant::dropout_dense) {
        ctx.element_mask =
            detail::sample_element_mask<T>(seed, layer.spec.p, x.rows(), x.cols());
        Matrix<T> masked = elementwise_mul(x, *ctx.element_mask);
        return {scale(dense_gemm(masked, layer.weight, layer.tiles, threads), s),
                std::move(ctx)};
    }
    DropoutSpec spec = layer.spec;
    spec.seed = seed;
    ctx.block_mask = sample_mask(spec, x.rows(), x.cols());
    return {dsd_matmul(x, *ctx.block_mask, layer.weight, s, layer.tiles, nullptr, threads),
            std::move(ctx)};
}

template <typename T>
struct LayerGrads {
    Matrix<T> dx;
    Matrix<T> dw;
};

// Manual backward for y = s * (x (.) m) W:
//   dx = s * (dy * W^T) (.) m      (sdd: the mask sits on the M x K output)
//   dw = s * (x (.) m)^T * dy      (dsd on transposed operands)
template <typename T>
LayerGrads<T> backward(const LinearLayer<T>& layer, const LayerContext<T>& ctx,
                       const Matrix<T>& dy, int threads = 1) {
    const Matrix<T>& x = ctx.input;
    if (dy.rows() != x.rows() || dy.cols() != layer.weight.cols())
        throw std::invalid_argument("layer backward: dy " + dy.shape_string() +
                                    " does not match forward shapes " + x.shape_string() +
                                    " * " + layer.weight.shape_string());
    const TileConfig t = layer.tiles;
    const TileConfig tiles_dx{t.m_blk, t.k_blk, t.n_blk};  // (M, K, N) problem
    const TileConfig tiles_dw{t.k_blk, t.n_blk, t.m_blk};  // (K, N, M) problem

    if (!ctx.training || layer.kind == LinearVariant::dense ||
        (layer.kind == LinearVariant::dropout_dense && !ctx.element_mask) ||
        (layer.kind == LinearVariant::sparsedrop && !ctx.block_mask)) {
        return {dense_gemm(dy, transpose(layer.weight), tiles_dx, threads),
                dense_gemm(transpose(x), dy, tiles_dw, threads)};
    }

    const T s = detail::dropout_scale<T>(layer.spec.p);
    if (layer.kind == LinearVariant::dropout_dense) {
        const Matrix<T>& m = *ctx.element_mask;
        Matrix<T> dx =
            scale(elementwise_mul(dense_gemm(dy, transpose(layer.weight), tiles_dx, threads), m),
                  s);
        Matrix<T> dw =
            scale(dense_gemm(transpose(elementwise_mul(x, m)), dy, tiles_dw, threads), s);
        return {std::move(dx), std::move(dw)};
    }
    const BlockMask& m = *ctx.block_mask;
    Matrix<T> dx = sdd_matmul(dy, transpose(layer.weight), m, s, tiles_dx, nullptr, threads);
    Matrix<T> dw =
        dsd_matmul(transpose(x), transpose_mask(m), dy, s, tiles_dw, nullptr, threads);
    return {std::move(dx), std::move(dw)};
}

// Mean training-mode output over n_samples independent step seeds; converges
// to the inference output x * W as n_samples grows (the 1/(1-p) scaling makes
// the dropout forward unbiased).
template <typename T>
Matrix<T> expectation_check(const LinearLayer<T>& layer, const Matrix<T>& x, int n_samples) {
    if (n_samples < 1) throw std::invalid_argument("expectation_check needs n_samples >= 1");
    Matrix<double> sum(x.rows(), layer.weight.cols());
    for (int s = 0; s < n_samples; ++s) {
        auto [y, ctx] = forward(layer, x, true, static_cast<std::uint64_t>(s));
        for (std::size_t i = 0; i < y.size(); ++i) sum.data()[i] += y.data()[i];
    }
    Matrix<T> mean(x.rows(), layer.weight.cols());
    for (std::size_t i = 0; i < mean.size(); ++i)
        mean.data()[i] = static_cast<T>(sum.data()[i] / n_samples);
    return mean;
}

}  // namespace sparsedrop
