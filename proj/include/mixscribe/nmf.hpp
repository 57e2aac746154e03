#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mixscribe/block_sparse.hpp"
#include "mixscribe/errors.hpp"
#include "mixscribe/matrix.hpp"
#include "mixscribe/parallel.hpp"

namespace mixscribe {

// Column layout of the concatenated dictionary X = (X^(1) ... X^(I), X-bar):
// one frozen block per track, the trainable noise block last.
struct TrackBlockSpan {
    int track_id = 0;
    std::size_t column_offset = 0;
    std::size_t width = 0; // T^(i)
};

struct DictionaryLayout {
    std::vector<TrackBlockSpan> track_blocks;
    std::size_t noise_width = 0; // R

    std::size_t total_columns() const
    {
        std::size_t n = noise_width;
        for (const auto& b : track_blocks) n += b.width;
        return n;
    }

    std::size_t noise_offset() const { return total_columns() - noise_width; }

    void validate() const
    {
        std::size_t offset = 0;
        for (const auto& b : track_blocks) {
            if (b.width == 0) throw InvalidParams("dictionary track block must have width >= 1");
            if (b.column_offset != offset)
                throw InvalidParams("dictionary track blocks must be contiguous and ordered");
            offset += b.width;
        }
    }
};

// Layout implied by the row structure of a stacked activation matrix.
inline DictionaryLayout layout_from_activations(const BlockSparseActivations& h)
{
    DictionaryLayout layout;
    for (std::size_t b = 0; b < h.block_count(); ++b) {
        const auto& block = h.block(b);
        if (block.is_noise())
            layout.noise_width = block.n_rows();
        else
            layout.track_blocks.push_back({block.track_id(), block.row_offset(), block.n_rows()});
    }
    layout.validate();
    return layout;
}

struct NmfConfig {
    std::size_t max_iters = 100;
    double rel_tol = 1e-4; // relative divergence decrease threshold
    double eps = 1e-12;    // numerical floor

    void validate() const
    {
        if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw InvalidParams("rel_tol must be in (0, 1)");
        if (!(eps > 0.0)) throw InvalidParams("eps must be positive");
    }
};

// Itakura-Saito divergence, summed entrywise with both arguments floored at
// eps: d(x|y) = x/y - ln(x/y) - 1.
inline double is_divergence(const Matrix& y, const Matrix& v, double eps = 1e-12)
{
    require_same_shape(y, v, "is_divergence");
    std::vector<double> partial(y.cols(), 0.0);
    const std::size_t m = y.rows();
    parallel_for(y.cols(), [&](std::size_t c) {
        const double* yc = y.col(c);
        const double* vc = v.col(c);
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double x = yc[i] > eps ? yc[i] : eps;
            const double d = vc[i] > eps ? vc[i] : eps;
            const double q = x / d;
            s += q - std::log(q) - 1.0;
        }
        partial[c] = s;
    });
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

namespace detail {

// Fills a1 = Y / max(V, eps)^2 and a2 = 1 / max(V, eps).
inline void ratio_operands(const Matrix& y, const Matrix& v, double eps, Matrix& a1, Matrix& a2)
{
    a1 = Matrix(y.rows(), y.cols());
    a2 = Matrix(y.rows(), y.cols());
    const std::size_t m = y.rows();
    parallel_for(y.cols(), [&](std::size_t c) {
        const double* yc = y.col(c);
        const double* vc = v.col(c);
        double* o1 = a1.col(c);
        double* o2 = a2.col(c);
        for (std::size_t i = 0; i < m; ++i) {
            const double d = vc[i] > eps ? vc[i] : eps;
            const double inv = 1.0 / d;
            o1[i] = yc[i] * inv * inv;
            o2[i] = inv;
        }
    });
}

// One multiplicative step on every stored activation entry, given v = XH
// computed with the incoming H:
//   H <- H .* (X^T (v^-2 .* Y)) / (X^T v^-1)
// Entries that multiply to exactly zero are dropped from track-block storage;
// the noise block keeps its full support.
inline void apply_h_update(const Matrix& y, const Matrix& x, BlockSparseActivations& h,
                           const Matrix& v, double eps)
{
    Matrix a1, a2;
    ratio_operands(y, v, eps, a1, a2);
    const BlockSparseActivations num = masked_gram(x, a1, h);
    const BlockSparseActivations den = masked_gram(x, a2, h);

    parallel_for(h.n_cols(), [&](std::size_t c) {
        for (std::size_t b = 0; b < h.block_count(); ++b) {
            auto& col = h.block(b).column(c);
            const auto& ncol = num.block(b).column(c);
            const auto& dcol = den.block(b).column(c);
            for (std::size_t k = 0; k < col.size(); ++k) {
                const double d = dcol[k].value > eps ? dcol[k].value : eps;
                col[k].value *= ncol[k].value / d;
            }
            if (!h.block(b).is_noise()) {
                std::size_t keep = 0;
                for (const auto& e : col)
                    if (e.value > 0.0) col[keep++] = e;
                col.resize(keep);
            }
        }
    });
}

// Multiplicative step on the noise dictionary columns, given v = XH for the
// current factors:
//   Xbar <- Xbar .* ((v^-2 .* Y) Hbar^T) / (v^-1 Hbar^T)
// Track dictionary columns are untouched. v is updated in place with the
// noise columns' delta so it stays equal to XH.
inline void apply_xbar_update(const Matrix& y, Matrix& x, const BlockSparseActivations& h,
                              const DictionaryLayout& layout, Matrix& v, double eps)
{
    const std::size_t r_width = layout.noise_width;
    if (r_width == 0) return;
    if (!h.has_noise_block() || h.noise_block().n_rows() != r_width)
        throw InvalidInput("update_xbar: activation noise rows do not match layout");

    Matrix a1, a2;
    ratio_operands(y, v, eps, a1, a2);

    const ActivationBlock& hbar = h.noise_block();
    const std::size_t m = x.rows();
    const std::size_t k_cols = h.n_cols();

    // transpose the noise rows: per noise row, the (column, value) pairs
    std::vector<std::vector<std::pair<std::size_t, double>>> by_row(r_width);
    for (std::size_t c = 0; c < k_cols; ++c)
        for (const auto& e : hbar.column(c)) by_row[e.row].push_back({c, e.value});

    const std::size_t noise_off = layout.noise_offset();
    Matrix delta(m, r_width);
    parallel_for(r_width, [&](std::size_t r) {
        std::vector<double> num(m, 0.0), den(m, 0.0);
        for (const auto& [c, hv] : by_row[r]) {
            const double* c1 = a1.col(c);
            const double* c2 = a2.col(c);
            for (std::size_t i = 0; i < m; ++i) {
                num[i] += c1[i] * hv;
                den[i] += c2[i] * hv;
            }
        }
        double* xcol = x.col(noise_off + r);
        double* dcol = delta.col(r);
        for (std::size_t i = 0; i < m; ++i) {
            const double d = den[i] > eps ? den[i] : eps;
            const double updated = xcol[i] * (num[i] / d);
            dcol[i] = updated - xcol[i];
            xcol[i] = updated;
        }
    });

    parallel_for(k_cols, [&](std::size_t c) {
        double* vc = v.col(c);
        for (const auto& e : hbar.column(c)) {
            const double* dcol = delta.col(e.row);
            const double hv = e.value;
            for (std::size_t i = 0; i < m; ++i) vc[i] += dcol[i] * hv;
        }
    });
}

inline void check_problem_shapes(const Matrix& y, const Matrix& x, const BlockSparseActivations& h)
{
    if (x.cols() != h.total_rows())
        throw InvalidInput("nmf: X has " + std::to_string(x.cols()) + " columns but H has "
                           + std::to_string(h.total_rows()) + " rows");
    if (y.rows() != x.rows())
        throw InvalidInput("nmf: Y and X row counts differ");
    if (y.cols() != h.n_cols())
        throw InvalidInput("nmf: Y and H column counts differ");
}

} // namespace detail

// One multiplicative update of all activations (track blocks and noise rows).
inline BlockSparseActivations update_h(const Matrix& y, const Matrix& x, BlockSparseActivations h,
                                       double eps = 1e-12)
{
    detail::check_problem_shapes(y, x, h);
    const Matrix v = reconstruct(x, h);
    detail::apply_h_update(y, x, h, v, eps);
    return h;
}

// One multiplicative update of the noise dictionary columns. Track blocks of
// X come back bit-identical; noise_width 0 is a no-op.
inline Matrix update_xbar(const Matrix& y, Matrix x, const BlockSparseActivations& h,
                          const DictionaryLayout& layout, double eps = 1e-12)
{
    detail::check_problem_shapes(y, x, h);
    if (layout.total_columns() != x.cols())
        throw InvalidInput("update_xbar: layout does not cover X");
    if (layout.noise_width == 0) return x;
    Matrix v = reconstruct(x, h);
    detail::apply_xbar_update(y, x, h, layout, v, eps);
    return x;
}

struct IsnmfResult {
    Matrix x;
    BlockSparseActivations h;
    std::vector<double> trace; // divergence after each completed iteration
};

// Alternates the H update and the noise-dictionary update until the relative
// divergence decrease falls below rel_tol or max_iters is exhausted.
inline IsnmfResult isnmf(const Matrix& y, Matrix x, BlockSparseActivations h,
                         const DictionaryLayout& layout, const NmfConfig& cfg)
{
    cfg.validate();
    detail::check_problem_shapes(y, x, h);
    if (layout.total_columns() != x.cols())
        throw InvalidInput("isnmf: layout does not cover X");

    IsnmfResult result;
    if (cfg.max_iters == 0) {
        result.x = std::move(x);
        result.h = std::move(h);
        return result;
    }

    Matrix v = reconstruct(x, h);
    double d_prev = is_divergence(y, v, cfg.eps);

    for (std::size_t iter = 1; iter <= cfg.max_iters; ++iter) {
        detail::apply_h_update(y, x, h, v, cfg.eps);
        v = reconstruct(x, h);
        detail::apply_xbar_update(y, x, h, layout, v, cfg.eps);

        const double d = is_divergence(y, v, cfg.eps);
        if (!std::isfinite(d))
            throw NumericalFailure("isnmf: non-finite divergence at iteration "
                                   + std::to_string(iter));
        result.trace.push_back(d);
        if (d_prev - d <= cfg.rel_tol * d_prev) break;
        d_prev = d;
    }

    result.x = std::move(x);
    result.h = std::move(h);
    return result;
}

} // namespace mixscribe
