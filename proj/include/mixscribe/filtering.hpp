#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "mixscribe/block_sparse.hpp"
#include "mixscribe/errors.hpp"
#include "mixscribe/matrix.hpp"

namespace mixscribe {

struct FilterParams {
    double slope_min = 0.5;     // track frames per mix frame
    double slope_max = 2.0;
    std::size_t kernel_len = 5; // d, frames
    std::size_t n_slopes = 7;
    double blur_sigma = 1.0;    // frames
    double threshold_rel = 0.01;

    void validate() const
    {
        if (!(slope_min > 0.0 && slope_min <= slope_max))
            throw InvalidParams("filter: require 0 < slope_min <= slope_max");
        if (kernel_len < 2) throw InvalidParams("filter: kernel_len must be >= 2");
        if (n_slopes < 1) throw InvalidParams("filter: n_slopes must be >= 1");
        if (!(blur_sigma > 0.0)) throw InvalidParams("filter: blur_sigma must be positive");
        if (!(threshold_rel > 0.0 && threshold_rel < 1.0))
            throw InvalidParams("filter: threshold_rel must be in (0, 1)");
    }
};

// A discrete line of slope s: one cell per column, d columns.
struct LineKernel {
    std::vector<std::pair<long, long>> cells; // (row, col) offsets
};

inline LineKernel line_kernel(double slope, std::size_t length)
{
    if (!(slope > 0.0)) throw InvalidParams("line_kernel: slope must be positive");
    if (length < 2) throw InvalidParams("line_kernel: length must be >= 2");
    LineKernel k;
    k.cells.reserve(length);
    for (std::size_t c = 0; c < length; ++c)
        k.cells.push_back({std::lround(slope * static_cast<double>(c)), static_cast<long>(c)});
    return k;
}

// Geometrically spaced slopes over [slope_min, slope_max].
inline std::vector<double> sampled_slopes(const FilterParams& p)
{
    std::vector<double> slopes;
    if (p.n_slopes == 1) {
        slopes.push_back(std::sqrt(p.slope_min * p.slope_max));
        return slopes;
    }
    const double ratio = p.slope_max / p.slope_min;
    for (std::size_t j = 0; j < p.n_slopes; ++j)
        slopes.push_back(p.slope_min
                         * std::pow(ratio, static_cast<double>(j)
                                               / static_cast<double>(p.n_slopes - 1)));
    return slopes;
}

namespace detail {

// Grayscale erosion with a flat kernel clipped to in-bounds cells. The kernel
// always contains (0,0), so the min is never over an empty set.
inline Matrix erode(const Matrix& in, const LineKernel& k)
{
    const long rows = static_cast<long>(in.rows());
    const long cols = static_cast<long>(in.cols());
    Matrix out(in.rows(), in.cols());
    for (long c = 0; c < cols; ++c) {
        for (long r = 0; r < rows; ++r) {
            double m = in(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
            for (const auto& [dr, dc] : k.cells) {
                const long rr = r + dr, cc = c + dc;
                if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
                const double v = in(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
                if (v < m) m = v;
            }
            out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = m;
        }
    }
    return out;
}

// Dilation with the reflected kernel, clipped the same way.
inline Matrix dilate(const Matrix& in, const LineKernel& k)
{
    const long rows = static_cast<long>(in.rows());
    const long cols = static_cast<long>(in.cols());
    Matrix out(in.rows(), in.cols());
    for (long c = 0; c < cols; ++c) {
        for (long r = 0; r < rows; ++r) {
            double m = in(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
            for (const auto& [dr, dc] : k.cells) {
                const long rr = r - dr, cc = c - dc;
                if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
                const double v = in(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
                if (v > m) m = v;
            }
            out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = m;
        }
    }
    return out;
}

} // namespace detail

inline Matrix morph_open(const Matrix& block, const LineKernel& k)
{
    return detail::dilate(detail::erode(block, k), k);
}

// Line-enhancing filter: max over the sampled slopes of the opening with each
// line kernel. Keeps runs of length >= kernel_len along some sampled slope,
// wipes anything shorter.
inline Matrix morph_open_lines(const Matrix& block, const FilterParams& params)
{
    params.validate();
    Matrix acc(block.rows(), block.cols());
    for (double s : sampled_slopes(params)) {
        const Matrix opened = morph_open(block, line_kernel(s, params.kernel_len));
        for (std::size_t i = 0; i < acc.size(); ++i)
            if (opened.data()[i] > acc.data()[i]) acc.data()[i] = opened.data()[i];
    }
    return acc;
}

// Separable Gaussian blur, kernel truncated at radius ceil(3 sigma) and
// normalized to sum 1; borders renormalize over the in-bounds taps.
inline Matrix gaussian_blur(const Matrix& block, double sigma)
{
    if (!(sigma > 0.0)) throw InvalidParams("gaussian_blur: sigma must be positive");
    const long radius = static_cast<long>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (long j = -radius; j <= radius; ++j) {
        kernel[j + radius] = std::exp(-0.5 * (static_cast<double>(j) / sigma)
                                      * (static_cast<double>(j) / sigma));
        sum += kernel[j + radius];
    }
    for (double& v : kernel) v /= sum;

    const long rows = static_cast<long>(block.rows());
    const long cols = static_cast<long>(block.cols());

    Matrix tmp(block.rows(), block.cols());
    for (long c = 0; c < cols; ++c) {
        for (long r = 0; r < rows; ++r) {
            double acc = 0.0, weight = 0.0;
            for (long j = -radius; j <= radius; ++j) {
                const long rr = r + j;
                if (rr < 0 || rr >= rows) continue;
                const double w = kernel[j + radius];
                acc += w * block(static_cast<std::size_t>(rr), static_cast<std::size_t>(c));
                weight += w;
            }
            tmp(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = acc / weight;
        }
    }
    Matrix out(block.rows(), block.cols());
    for (long c = 0; c < cols; ++c) {
        for (long r = 0; r < rows; ++r) {
            double acc = 0.0, weight = 0.0;
            for (long j = -radius; j <= radius; ++j) {
                const long cc = c + j;
                if (cc < 0 || cc >= cols) continue;
                const double w = kernel[j + radius];
                acc += w * tmp(static_cast<std::size_t>(r), static_cast<std::size_t>(cc));
                weight += w;
            }
            out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = acc / weight;
        }
    }
    return out;
}

// Zeroes entries strictly below threshold_rel times the block maximum.
inline Matrix threshold_zero(Matrix block, double threshold_rel)
{
    if (!(threshold_rel > 0.0 && threshold_rel < 1.0))
        throw InvalidParams("threshold_zero: threshold_rel must be in (0, 1)");
    const double cut = threshold_rel * block.max_value();
    for (double& v : block.data())
        if (v < cut) v = 0.0;
    return block;
}

// The inter-pass filter: opening, blur, threshold, applied to each track
// block independently. Noise rows pass through untouched.
inline BlockSparseActivations interpass_filter(const BlockSparseActivations& h,
                                               const FilterParams& params)
{
    params.validate();
    std::vector<ActivationBlock> blocks;
    blocks.reserve(h.block_count());
    for (std::size_t b = 0; b < h.block_count(); ++b) {
        const auto& block = h.block(b);
        if (block.is_noise()) {
            blocks.push_back(block);
            continue;
        }
        Matrix dense = to_dense(block);
        dense = morph_open_lines(dense, params);
        dense = gaussian_blur(dense, params.blur_sigma);
        dense = threshold_zero(std::move(dense), params.threshold_rel);
        blocks.push_back(from_dense(dense, block.row_offset(), block.track_id()));
    }
    return BlockSparseActivations(std::move(blocks));
}

// Nearest-neighbor resampling onto a new frame grid: cell (t, c) of the
// output copies cell (floor(t*T_old/T_new), floor(c*K_old/K_new)) of the
// input. Values are copied, not mass-normalized, and exact zeros stay zero.
inline ActivationBlock scale_block(const ActivationBlock& in, std::size_t new_rows,
                                   std::size_t new_cols)
{
    if (in.n_rows() == 0 || in.n_cols() == 0 || new_rows == 0 || new_cols == 0)
        throw InvalidInput("scale_block: zero-size grid");
    ActivationBlock out(in.track_id(), in.row_offset(), new_rows, new_cols);
    const std::size_t old_rows = in.n_rows();
    for (std::size_t c = 0; c < new_cols; ++c) {
        const std::size_t c_old = c * in.n_cols() / new_cols;
        auto& col = out.column(c);
        for (const auto& e : in.column(c_old)) {
            // output rows t with floor(t*old_rows/new_rows) == e.row
            const std::size_t lo =
                (static_cast<std::size_t>(e.row) * new_rows + old_rows - 1) / old_rows;
            std::size_t hi = ((static_cast<std::size_t>(e.row) + 1) * new_rows + old_rows - 1)
                             / old_rows;
            if (hi > new_rows) hi = new_rows;
            for (std::size_t t = lo; t < hi; ++t)
                col.push_back({static_cast<std::uint32_t>(t), e.value});
        }
    }
    return out;
}

// Rescales every block; new_rows_per_block is aligned with H's block order.
inline BlockSparseActivations scale_activations(const BlockSparseActivations& h,
                                                const std::vector<std::size_t>& new_rows_per_block,
                                                std::size_t new_cols)
{
    if (new_rows_per_block.size() != h.block_count())
        throw InvalidInput("scale_activations: one row count per block required");
    std::vector<ActivationBlock> blocks;
    blocks.reserve(h.block_count());
    std::size_t offset = 0;
    for (std::size_t b = 0; b < h.block_count(); ++b) {
        ActivationBlock scaled = scale_block(h.block(b), new_rows_per_block[b], new_cols);
        scaled.set_row_offset(offset);
        offset += scaled.n_rows();
        blocks.push_back(std::move(scaled));
    }
    return BlockSparseActivations(std::move(blocks));
}

} // namespace mixscribe
